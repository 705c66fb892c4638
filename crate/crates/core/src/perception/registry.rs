use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{CharacterId, ElementId, TitleCorpus};
use crate::geometry::BBox;
use crate::labels::Identity;
use crate::seed::derive_rng;

pub const DEFAULT_MIN_APPEARANCES: usize = 50;
pub const DEFAULT_N_REF: usize = 40;

/// The k main characters of a title; everyone else is OTHERS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterRegistry {
    pub title_id: String,
    pub main_characters: Vec<CharacterId>,
}

impl CharacterRegistry {
    pub fn k(&self) -> usize {
        self.main_characters.len()
    }

    pub fn classify(&self, character: &str) -> Identity {
        if self.main_characters.iter().any(|c| c == character) {
            Identity::Character(character.to_string())
        } else {
            Identity::Others
        }
    }

    /// All k+1 labels, main characters first.
    pub fn labels(&self) -> Vec<Identity> {
        self.main_characters
            .iter()
            .cloned()
            .map(Identity::Character)
            .chain(std::iter::once(Identity::Others))
            .collect()
    }
}

/// A character crop, identified by its annotation element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRef {
    pub title_id: String,
    pub page_index: u32,
    pub element_id: ElementId,
    pub bbox: BBox,
}

/// Per-character labelled crops plus OTHERS negatives from other titles.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub per_character: BTreeMap<CharacterId, Vec<CropRef>>,
    pub negatives: Vec<CropRef>,
}

impl ReferenceSet {
    /// Flattened `(crop, label)` training pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (&CropRef, Identity)> {
        self.per_character
            .iter()
            .flat_map(|(c, crops)| crops.iter().map(move |crop| (crop, Identity::Character(c.clone()))))
            .chain(self.negatives.iter().map(|crop| (crop, Identity::Others)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegistryWarning {
    FewReferences { character: CharacterId, available: usize, wanted: usize },
    FewNegatives { available: usize, wanted: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryBuild {
    pub registry: CharacterRegistry,
    pub references: ReferenceSet,
    pub warnings: Vec<RegistryWarning>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RegistryError {
    /// No character appears often enough. The empty registry maps everyone to OTHERS.
    #[error("no character of {} appears more than the threshold", .registry.title_id)]
    NoMainCharacters { registry: CharacterRegistry },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryParams {
    pub min_appearances: usize,
    pub n_ref: usize,
    pub seed: u64,
}

impl Default for RegistryParams {
    fn default() -> Self {
        Self {
            min_appearances: DEFAULT_MIN_APPEARANCES,
            n_ref: DEFAULT_N_REF,
            seed: 0,
        }
    }
}

/// Body instances of every title in `corpora`, as crop references.
pub fn crop_pool(corpora: &[TitleCorpus]) -> Vec<CropRef> {
    corpora
        .iter()
        .flat_map(|c| &c.pages)
        .flat_map(|p| {
            p.bodies.iter().map(|b| CropRef {
                title_id: p.title_id.clone(),
                page_index: p.page_index,
                element_id: b.id.clone(),
                bbox: b.bbox,
            })
        })
        .collect()
}

fn pick(crops: Vec<CropRef>, n: usize, seed: u64, stream: &[&str]) -> Vec<CropRef> {
    if crops.len() <= n {
        return crops;
    }
    let mut rng = derive_rng(seed, stream);
    let mut idx = sample(&mut rng, crops.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| crops[i].clone()).collect()
}

/// Main characters are those with strictly more than `min_appearances` body
/// instances. Up to `n_ref` references are drawn per main character, and
/// `n_ref` negatives from `negative_pool` entries of other titles.
pub fn build_registry(
    corpus: &TitleCorpus,
    negative_pool: &[CropRef],
    params: RegistryParams,
) -> Result<RegistryBuild, RegistryError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for b in corpus.pages.iter().flat_map(|p| &p.bodies) {
        *counts.entry(b.character.as_str()).or_default() += 1;
    }
    let main_characters: Vec<CharacterId> = corpus
        .characters
        .iter()
        .filter(|c| counts.get(c.id.as_str()).copied().unwrap_or(0) > params.min_appearances)
        .map(|c| c.id.clone())
        .collect();
    let registry = CharacterRegistry {
        title_id: corpus.title_id.clone(),
        main_characters,
    };
    if registry.k() == 0 {
        return Err(RegistryError::NoMainCharacters { registry });
    }

    let own = crop_pool(std::slice::from_ref(corpus));
    let mut warnings = Vec::new();
    let mut references = ReferenceSet::default();
    for character in &registry.main_characters {
        let ids: Vec<&str> = corpus
            .pages
            .iter()
            .flat_map(|p| &p.bodies)
            .filter(|b| &b.character == character)
            .map(|b| b.id.as_str())
            .collect();
        let crops: Vec<CropRef> = own.iter().filter(|c| ids.contains(&c.element_id.as_str())).cloned().collect();
        if crops.len() < params.n_ref {
            warnings.push(RegistryWarning::FewReferences {
                character: character.clone(),
                available: crops.len(),
                wanted: params.n_ref,
            });
        }
        let chosen = pick(crops, params.n_ref, params.seed, &["refs", &corpus.title_id, character]);
        references.per_character.insert(character.clone(), chosen);
    }

    let foreign: Vec<CropRef> = negative_pool.iter().filter(|c| c.title_id != corpus.title_id).cloned().collect();
    if foreign.len() < params.n_ref {
        warnings.push(RegistryWarning::FewNegatives {
            available: foreign.len(),
            wanted: params.n_ref,
        });
    }
    references.negatives = pick(foreign, params.n_ref, params.seed, &["negatives", &corpus.title_id]);

    Ok(RegistryBuild {
        registry,
        references,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Body, Character, PageAnnotation};

    fn corpus(title: &str, counts: &[(&str, usize)]) -> TitleCorpus {
        let mut bodies = Vec::new();
        for (c, n) in counts {
            for i in 0..*n {
                bodies.push(Body {
                    id: format!("{title}-{c}-{i}"),
                    bbox: BBox::new(0, 0, 10, 10).unwrap(),
                    character: c.to_string(),
                });
            }
        }
        TitleCorpus {
            title_id: title.into(),
            characters: counts.iter().map(|(c, _)| Character { id: c.to_string(), name: c.to_string() }).collect(),
            pages: vec![PageAnnotation {
                title_id: title.into(),
                page_index: 0,
                width: 100,
                height: 100,
                frames: vec![],
                texts: vec![],
                bodies,
                faces: vec![],
            }],
            speaker_links: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn threshold_is_strict() {
        let c = corpus("T", &[("A", 60), ("B", 51), ("C", 50)]);
        let pool = crop_pool(&[corpus("U", &[("X", 100)])]);
        let built = build_registry(&c, &pool, RegistryParams::default()).unwrap();
        assert_eq!(built.registry.main_characters, ["A", "B"]);
        assert_eq!(built.references.per_character["A"].len(), 40);
        assert_eq!(built.references.negatives.len(), 40);
        assert!(built.references.negatives.iter().all(|n| n.title_id == "U"));
        assert_eq!(built.registry.classify("C"), Identity::Others);
    }

    #[test]
    fn short_supply_is_clamped_with_warning() {
        let c = corpus("T", &[("A", 35)]);
        let params = RegistryParams { min_appearances: 10, ..Default::default() };
        let built = build_registry(&c, &[], params).unwrap();
        assert_eq!(built.references.per_character["A"].len(), 35);
        assert!(built.warnings.contains(&RegistryWarning::FewReferences { character: "A".into(), available: 35, wanted: 40 }));
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let c = corpus("T", &[("A", 200), ("B", 90)]);
        let pool = crop_pool(&[corpus("U", &[("X", 100)]), corpus("V", &[("Y", 100)])]);
        let params = RegistryParams { seed: 7, ..Default::default() };
        let a = build_registry(&c, &pool, params).unwrap();
        let b = build_registry(&c, &pool, params).unwrap();
        assert_eq!(a, b);
        let other = build_registry(&c, &pool, RegistryParams { seed: 8, ..params }).unwrap();
        assert_ne!(a.references, other.references);
    }

    #[test]
    fn empty_registry_is_a_distinct_error() {
        let c = corpus("T", &[("A", 3)]);
        match build_registry(&c, &[], RegistryParams::default()) {
            Err(RegistryError::NoMainCharacters { registry }) => assert_eq!(registry.k(), 0),
            other => panic!("{other:?}"),
        }
    }
}
