use serde::{Deserialize, Serialize};

use super::AttributionError;

pub const DEFAULT_GLOBAL_BUDGET: usize = 2000;
pub const DEFAULT_LOCAL_BUDGET: usize = 800;

/// Rolling plot memory carried from page to page within a title.
///
/// Budgets count characters. Truncation keeps the head of a summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryState {
    pub global_summary: String,
    pub global_budget: usize,
    pub local_summary: String,
    pub local_budget: usize,
    /// Sequence number of the last page folded into the memory.
    pub page_cursor: Option<usize>,
}

impl Default for MemoryState {
    fn default() -> Self {
        Self::new(DEFAULT_GLOBAL_BUDGET, DEFAULT_LOCAL_BUDGET)
    }
}

pub fn truncate_chars(s: &str, budget: usize) -> String {
    match s.char_indices().nth(budget) {
        Some((cut, _)) => s[..cut].to_string(),
        None => s.to_string(),
    }
}

impl MemoryState {
    pub fn new(global_budget: usize, local_budget: usize) -> Self {
        Self {
            global_summary: String::new(),
            global_budget,
            local_summary: String::new(),
            local_budget,
            page_cursor: None,
        }
    }

    /// The sequence number of the page this memory is ready for.
    pub fn next_page(&self) -> usize {
        self.page_cursor.map_or(0, |c| c + 1)
    }

    pub fn check(&self) -> Result<(), AttributionError> {
        let g = self.global_summary.chars().count();
        let l = self.local_summary.chars().count();
        if g > self.global_budget || l > self.local_budget {
            return Err(AttributionError::Budget {
                global: g,
                global_budget: self.global_budget,
                local: l,
                local_budget: self.local_budget,
            });
        }
        Ok(())
    }

    /// Memory after accepting page `page_no` with fresh summaries.
    pub fn advanced(&self, page_no: usize, global: &str, local: &str) -> Self {
        Self {
            global_summary: truncate_chars(global, self.global_budget),
            local_summary: truncate_chars(local, self.local_budget),
            page_cursor: Some(page_no),
            ..self.clone()
        }
    }

    /// Memory after a page whose summaries could not be obtained.
    pub fn skipped(&self, page_no: usize) -> Self {
        Self {
            page_cursor: Some(page_no),
            ..self.clone()
        }
    }
}
