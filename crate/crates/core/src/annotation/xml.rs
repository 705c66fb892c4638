use std::collections::{BTreeMap, HashSet};

use quick_xml::events::{BytesEnd, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};

use super::{Body, Character, Face, Frame, IngestError, IngestWarning, PageAnnotation, TextRegion, TitleCorpus};
use crate::geometry::BBox;

fn line_of(src: &str, pos: usize) -> usize {
    let pos = pos.min(src.len());
    src.as_bytes()[..pos].iter().filter(|&&b| b == b'\n').count() + 1
}

struct Attrs(BTreeMap<String, String>);

impl Attrs {
    fn read(e: &BytesStart<'_>, line: usize) -> Result<Self, IngestError> {
        let mut map = BTreeMap::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| IngestError::Xml { line, message: err.to_string() })?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr
                .unescape_value()
                .map_err(|err| IngestError::Xml { line, message: err.to_string() })?
                .into_owned();
            map.insert(key, value);
        }
        Ok(Self(map))
    }

    fn get(&self, key: &str, tag: &str, line: usize) -> Result<&str, IngestError> {
        self.0.get(key).map(String::as_str).ok_or_else(|| IngestError::Schema {
            line,
            message: format!("<{tag}> is missing attribute {key:?}"),
        })
    }

    fn num(&self, key: &str, tag: &str, line: usize) -> Result<u32, IngestError> {
        let raw = self.get(key, tag, line)?;
        raw.trim().parse().map_err(|_| IngestError::Schema {
            line,
            message: format!("<{tag}> attribute {key}={raw:?} is not a non-negative integer"),
        })
    }
}

enum Pending {
    None,
    Text { id: String, bbox: Option<BBox>, content: String },
}

struct PageBuilder {
    page: PageAnnotation,
}

/// Parses one Manga109-style annotation document.
pub fn parse_xml(src: &str) -> Result<TitleCorpus, IngestError> {
    let mut reader = Reader::from_str(src);
    reader.config_mut().trim_text(false);

    let mut title: Option<String> = None;
    let mut characters = Vec::new();
    let mut pages: Vec<PageAnnotation> = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut current: Option<PageBuilder> = None;
    let mut pending = Pending::None;
    // (element id, character id) resolved against the roster at the end.
    let mut roster_checks: Vec<(u32, String, String)> = Vec::new();

    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader.read_event().map_err(|err| IngestError::Xml {
            line: line_of(src, reader.error_position() as usize),
            message: err.to_string(),
        })?;
        let line = line_of(src, pos);
        match event {
            Event::Eof => break,
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let tag = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                let attrs = Attrs::read(e, line)?;
                match tag.as_str() {
                    "book" => title = Some(attrs.get("title", "book", line)?.to_string()),
                    "character" => characters.push(Character {
                        id: attrs.get("id", "character", line)?.to_string(),
                        name: attrs.0.get("name").cloned().unwrap_or_default(),
                    }),
                    "page" => {
                        let page = PageAnnotation {
                            title_id: title.clone().unwrap_or_default(),
                            page_index: attrs.num("index", "page", line)?,
                            width: attrs.num("width", "page", line)?,
                            height: attrs.num("height", "page", line)?,
                            frames: Vec::new(),
                            texts: Vec::new(),
                            bodies: Vec::new(),
                            faces: Vec::new(),
                        };
                        if pages.iter().any(|p| p.page_index == page.page_index) {
                            return Err(IngestError::Schema {
                                line,
                                message: format!("duplicate page index {}", page.page_index),
                            });
                        }
                        if is_empty {
                            pages.push(page);
                        } else {
                            current = Some(PageBuilder { page });
                        }
                    }
                    "frame" | "text" | "body" | "face" => {
                        let Some(builder) = current.as_mut() else {
                            return Err(IngestError::Schema {
                                line,
                                message: format!("<{tag}> outside of <page>"),
                            });
                        };
                        let id = attrs.get("id", &tag, line)?.to_string();
                        if !seen_ids.insert(id.clone()) {
                            return Err(IngestError::DuplicateId { line, id });
                        }
                        let raw = [
                            attrs.num("xmin", &tag, line)?,
                            attrs.num("ymin", &tag, line)?,
                            attrs.num("xmax", &tag, line)?,
                            attrs.num("ymax", &tag, line)?,
                        ];
                        let bbox = checked_box(raw, &id, &builder.page, &mut warnings);
                        match tag.as_str() {
                            "frame" => {
                                if let Some(bbox) = bbox {
                                    builder.page.frames.push(Frame { id, bbox });
                                }
                            }
                            "text" => {
                                if is_empty {
                                    if let Some(bbox) = bbox {
                                        builder.page.texts.push(TextRegion { id, bbox, content: String::new() });
                                    }
                                } else {
                                    pending = Pending::Text { id, bbox, content: String::new() };
                                }
                            }
                            _ => {
                                let character = attrs.get("character", &tag, line)?.to_string();
                                roster_checks.push((builder.page.page_index, id.clone(), character.clone()));
                                if let Some(bbox) = bbox {
                                    if tag == "body" {
                                        builder.page.bodies.push(Body { id, bbox, character });
                                    } else {
                                        builder.page.faces.push(Face { id, bbox, character, emotion: None });
                                    }
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let Pending::Text { content, .. } = &mut pending {
                    let s = t.unescape().map_err(|err| IngestError::Xml { line, message: err.to_string() })?;
                    content.push_str(&s);
                }
            }
            Event::CData(t) => {
                if let Pending::Text { content, .. } = &mut pending {
                    content.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"text" => {
                    if let Pending::Text { id, bbox, content } = std::mem::replace(&mut pending, Pending::None) {
                        if let (Some(bbox), Some(builder)) = (bbox, current.as_mut()) {
                            builder.page.texts.push(TextRegion { id, bbox, content });
                        }
                    }
                }
                b"page" => {
                    if let Some(builder) = current.take() {
                        pages.push(builder.page);
                    }
                }
                _ => {}
            },
            _ => {}
        }
    }

    let title_id = title.ok_or(IngestError::Schema { line: 1, message: "missing <book title=...>".into() })?;
    let roster: HashSet<&str> = characters.iter().map(|c| c.id.as_str()).collect();
    let dangling: HashSet<String> = roster_checks
        .into_iter()
        .filter(|(_, _, c)| !roster.contains(c.as_str()))
        .map(|(_, id, character_id)| {
            warnings.push(IngestWarning::UnknownCharacter { element_id: id.clone(), character_id });
            id
        })
        .collect();
    for page in &mut pages {
        page.title_id = title_id.clone();
        page.bodies.retain(|b| !dangling.contains(&b.id));
        page.faces.retain(|f| !dangling.contains(&f.id));
    }
    pages.sort_by_key(|p| p.page_index);

    Ok(TitleCorpus {
        title_id,
        characters,
        pages,
        speaker_links: Vec::new(),
        warnings,
    })
}

fn checked_box(raw: [u32; 4], id: &str, page: &PageAnnotation, warnings: &mut Vec<IngestWarning>) -> Option<BBox> {
    let Ok(bbox) = BBox::try_from(raw) else {
        warnings.push(IngestWarning::DegenerateBox { element_id: id.to_string() });
        return None;
    };
    if bbox.xmax() <= page.width && bbox.ymax() <= page.height {
        return Some(bbox);
    }
    match bbox.clamp_to(page.width, page.height) {
        Some(clamped) => {
            warnings.push(IngestWarning::BoxClamped { element_id: id.to_string() });
            Some(clamped)
        }
        None => {
            warnings.push(IngestWarning::DegenerateBox { element_id: id.to_string() });
            None
        }
    }
}

fn boxed<'a>(tag: &'a str, id: &'a str, b: &BBox) -> BytesStart<'a> {
    let mut e = BytesStart::new(tag);
    e.push_attribute(("id", id));
    for (k, v) in [("xmin", b.xmin()), ("ymin", b.ymin()), ("xmax", b.xmax()), ("ymax", b.ymax())] {
        e.push_attribute((k, v.to_string().as_str()));
    }
    e
}

/// Writes the annotation document back out. Emotion labels and speaker links
/// are not part of the XML; they travel in the sidecar files.
pub fn write_xml(corpus: &TitleCorpus) -> String {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    // Writing into a Vec cannot fail.
    let mut emit = |e: Event<'_>| w.write_event(e).expect("in-memory write");
    emit(Event::Decl(quick_xml::events::BytesDecl::new("1.0", Some("utf-8"), None)));
    let mut book = BytesStart::new("book");
    book.push_attribute(("title", corpus.title_id.as_str()));
    emit(Event::Start(book));
    emit(Event::Start(BytesStart::new("characters")));
    for c in &corpus.characters {
        let mut e = BytesStart::new("character");
        e.push_attribute(("id", c.id.as_str()));
        e.push_attribute(("name", c.name.as_str()));
        emit(Event::Empty(e));
    }
    emit(Event::End(BytesEnd::new("characters")));
    emit(Event::Start(BytesStart::new("pages")));
    for p in &corpus.pages {
        let mut page = BytesStart::new("page");
        page.push_attribute(("index", p.page_index.to_string().as_str()));
        page.push_attribute(("width", p.width.to_string().as_str()));
        page.push_attribute(("height", p.height.to_string().as_str()));
        emit(Event::Start(page));
        for f in &p.frames {
            emit(Event::Empty(boxed("frame", &f.id, &f.bbox)));
        }
        for t in &p.texts {
            emit(Event::Start(boxed("text", &t.id, &t.bbox)));
            emit(Event::Text(BytesText::new(&t.content)));
            emit(Event::End(BytesEnd::new("text")));
        }
        for b in &p.bodies {
            let mut e = boxed("body", &b.id, &b.bbox);
            e.push_attribute(("character", b.character.as_str()));
            emit(Event::Empty(e));
        }
        for f in &p.faces {
            let mut e = boxed("face", &f.id, &f.bbox);
            e.push_attribute(("character", f.character.as_str()));
            emit(Event::Empty(e));
        }
        emit(Event::End(BytesEnd::new("page")));
    }
    emit(Event::End(BytesEnd::new("pages")));
    emit(Event::End(BytesEnd::new("book")));
    String::from_utf8(w.into_inner()).expect("writer emits UTF-8")
}
