//! Knowledge base of object attributes.
//!
//! File format, one attribute per line:
//!
//! ```text
//! # comment
//! Olympic pool | volume | 2500 m**3 | FINA minimum dimensions
//! ```
//!
//! Names may repeat across lines (one line per attribute) but a given
//! `(name, attribute)` pair may appear once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::units::{Dimension, Quantity, UnitRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Length,
    Area,
    Volume,
    Weight,
    Density,
    Speed,
    Time,
    Data,
    Cost,
    Calories,
}

impl Attribute {
    pub const ALL: [Attribute; 10] = [
        Attribute::Length,
        Attribute::Area,
        Attribute::Volume,
        Attribute::Weight,
        Attribute::Density,
        Attribute::Speed,
        Attribute::Time,
        Attribute::Data,
        Attribute::Cost,
        Attribute::Calories,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Length => "length",
            Attribute::Area => "area",
            Attribute::Volume => "volume",
            Attribute::Weight => "weight",
            Attribute::Density => "density",
            Attribute::Speed => "speed",
            Attribute::Time => "time",
            Attribute::Data => "data",
            Attribute::Cost => "cost",
            Attribute::Calories => "calories",
        }
    }

    /// Dimension every value of this attribute must have. Calories are kcal
    /// per gram stored as a bare number.
    pub fn dimension(self) -> Dimension {
        use Dimension as D;
        match self {
            Attribute::Length => D::LENGTH,
            Attribute::Area => D::LENGTH.powi(2),
            Attribute::Volume => D::LENGTH.powi(3),
            Attribute::Weight => D::MASS,
            Attribute::Density => D::MASS / D::LENGTH.powi(3),
            Attribute::Speed => D::LENGTH / D::TIME,
            Attribute::Time => D::TIME,
            Attribute::Data => D::INFORMATION,
            Attribute::Cost => D::CURRENCY,
            Attribute::Calories => D::DIMENSIONLESS,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = ();

    fn from_str(s: &str) -> Result<Attribute, ()> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "mass" => return Ok(Attribute::Weight),
            "information" => return Ok(Attribute::Data),
            _ => {}
        }
        Attribute::ALL.into_iter().find(|a| a.name() == s).ok_or(())
    }
}

/// One attribute value. The written text is kept so that it can be copied
/// into generated programs and parse back to the same magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct KbValue {
    pub quantity: Quantity,
    pub text: String,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KbObject {
    pub name: String,
    pub attributes: BTreeMap<Attribute, KbValue>,
}

impl KbObject {
    pub fn get(&self, attr: Attribute) -> Option<&KbValue> {
        self.attributes.get(&attr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    Schema {
        line: usize,
        reason: String,
    },
    Dimension {
        line: usize,
        object: String,
        attribute: Attribute,
        found: Dimension,
    },
}

impl Diagnostic {
    pub fn line(&self) -> usize {
        match self {
            Diagnostic::Schema { line, .. } | Diagnostic::Dimension { line, .. } => *line,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Schema { line, reason } => write!(f, "line {line}: schema error: {reason}"),
            Diagnostic::Dimension {
                line,
                object,
                attribute,
                found,
            } => write!(
                f,
                "line {line}: dimension error: {object}.{attribute} has dimension {found}, expected {}",
                attribute.dimension()
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{} invalid line(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
}

/// Immutable after loading.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KnowledgeBase {
    objects: BTreeMap<String, KbObject>,
    index: BTreeMap<Attribute, BTreeSet<String>>,
}

impl KnowledgeBase {
    pub fn parse(text: &str) -> Result<KnowledgeBase, KbError> {
        Self::parse_with(text, UnitRegistry::standard())
    }

    pub fn parse_with(text: &str, registry: &UnitRegistry) -> Result<KnowledgeBase, KbError> {
        let mut kb = KnowledgeBase::default();
        let mut diags = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let schema = |reason: String| Diagnostic::Schema { line, reason };
            let fields: Vec<&str> = t.split('|').map(str::trim).collect();
            if fields.len() != 4 {
                diags.push(schema(format!(
                    "expected 4 '|'-separated fields, found {}",
                    fields.len()
                )));
                continue;
            }
            let (name, attr, value, source) = (fields[0], fields[1], fields[2], fields[3]);
            if name.is_empty() {
                diags.push(schema("empty object name".into()));
                continue;
            }
            let Ok(attribute) = attr.parse::<Attribute>() else {
                diags.push(schema(format!("unknown attribute {attr:?}")));
                continue;
            };
            let quantity = match registry.parse_quantity(value) {
                Ok(q) => q,
                Err(e) => {
                    diags.push(schema(format!("bad value {value:?}: {e}")));
                    continue;
                }
            };
            if quantity.magnitude() <= 0.0 {
                diags.push(schema(format!("value {value:?} is not positive")));
                continue;
            }
            if quantity.dimension() != attribute.dimension() {
                diags.push(Diagnostic::Dimension {
                    line,
                    object: name.to_string(),
                    attribute,
                    found: quantity.dimension(),
                });
                continue;
            }
            let obj = kb
                .objects
                .entry(name.to_string())
                .or_insert_with(|| KbObject {
                    name: name.to_string(),
                    attributes: BTreeMap::new(),
                });
            if obj.attributes.contains_key(&attribute) {
                diags.push(schema(format!("duplicate entry {name} | {attribute}")));
                continue;
            }
            obj.attributes.insert(
                attribute,
                KbValue {
                    quantity,
                    text: value.to_string(),
                    source: source.to_string(),
                },
            );
            kb.index.entry(attribute).or_default().insert(name.to_string());
        }
        if diags.is_empty() {
            Ok(kb)
        } else {
            Err(KbError::Invalid(diags))
        }
    }

    pub fn load(path: &Path) -> Result<KnowledgeBase, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Canonical text form: objects by name, attributes in declaration order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# object | attribute | value | source\n");
        for obj in self.objects.values() {
            for (attr, v) in &obj.attributes {
                out.push_str(&format!("{} | {} | {} | {}\n", obj.name, attr, v.text, v.source));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        std::fs::write(path, self.to_text()).map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, name: &str) -> Option<&KbObject> {
        self.objects.get(name)
    }

    pub fn objects(&self) -> impl Iterator<Item = &KbObject> {
        self.objects.values()
    }

    pub fn value(&self, name: &str, attr: Attribute) -> Option<&KbValue> {
        self.objects.get(name)?.get(attr)
    }

    /// Names of the objects having every attribute in `attrs`. An empty set
    /// of attributes selects every object.
    pub fn objects_with(&self, attrs: &[Attribute]) -> BTreeSet<String> {
        let mut sets = attrs.iter().map(|a| self.index.get(a));
        let Some(first) = sets.next() else {
            return self.objects.keys().cloned().collect();
        };
        let mut out: BTreeSet<String> = first.cloned().unwrap_or_default();
        for s in sets {
            match s {
                Some(s) => out.retain(|n| s.contains(n)),
                None => out.clear(),
            }
        }
        out
    }
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase, KbError> {
    KnowledgeBase::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_path() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sample_kb.txt")
    }

    fn diagnostics(text: &str) -> Vec<Diagnostic> {
        match KnowledgeBase::parse(text) {
            Err(KbError::Invalid(d)) => d,
            other => panic!("expected diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn one_object() {
        let kb = KnowledgeBase::parse("Olympic pool | volume | 2500 m**3 | test\n").unwrap();
        assert_eq!(kb.len(), 1);
        assert_eq!(
            kb.objects_with(&[Attribute::Volume]),
            BTreeSet::from(["Olympic pool".to_string()])
        );
        assert!(kb.objects_with(&[Attribute::Volume, Attribute::Speed]).is_empty());
        let v = kb.value("Olympic pool", Attribute::Volume).unwrap();
        assert_eq!(v.quantity.magnitude(), 2500.0);
        assert_eq!(v.text, "2500 m**3");
    }

    #[test]
    fn duplicate_entry_is_schema_error() {
        let d = diagnostics("# c\npool | volume | 1 m**3 | a\npool | volume | 2 m**3 | b\n");
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0], Diagnostic::Schema { line: 3, reason } if reason.contains("duplicate")));
    }

    #[test]
    fn dimension_error_names_object_and_attribute() {
        let d = diagnostics("car | speed | 5 kg | x\n");
        assert_eq!(
            d,
            vec![Diagnostic::Dimension {
                line: 1,
                object: "car".into(),
                attribute: Attribute::Speed,
                found: Dimension::MASS
            }]
        );
    }

    #[test]
    fn schema_errors_are_line_numbered() {
        let d = diagnostics(
            "a | volume | 1 m**3\n\nb | colour | 3 | x\nc | length | -2 m | x\nd | length | 2 parsecs | x\n | length | 1 m | x\ne|f | length | 1 m | x\n",
        );
        let lines: Vec<usize> = d.iter().map(Diagnostic::line).collect();
        assert_eq!(lines, vec![1, 3, 4, 5, 6, 7]);
        assert!(d.iter().all(|x| matches!(x, Diagnostic::Schema { .. })));
    }

    #[test]
    fn attribute_aliases() {
        assert_eq!("mass".parse(), Ok(Attribute::Weight));
        assert_eq!("Information".parse(), Ok(Attribute::Data));
        assert_eq!("colour".parse::<Attribute>(), Err(()));
        for a in Attribute::ALL {
            assert_eq!(a.name().parse(), Ok(a));
        }
    }

    #[test]
    fn calories_are_bare_numbers() {
        assert!(KnowledgeBase::parse("apple | calories | 0.52 | x").is_ok());
        assert!(KnowledgeBase::parse("apple | calories | 0.52 J | x").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_kb(Path::new("/nonexistent/kb.txt")),
            Err(KbError::Io { .. })
        ));
    }

    #[test]
    fn sample_kb_is_clean_and_covers_every_attribute() {
        let kb = load_kb(&sample_path()).unwrap();
        assert!(kb.len() >= 50);
        for a in Attribute::ALL {
            assert!(!kb.objects_with(&[a]).is_empty(), "{a}");
        }
    }

    #[test]
    fn sample_kb_matches_manifest() {
        let kb = load_kb(&sample_path()).unwrap();
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sample_kb.manifest.json");
        let manifest: BTreeMap<String, BTreeSet<String>> =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(manifest.len(), Attribute::ALL.len());
        for (attr, names) in manifest {
            let a: Attribute = attr.parse().unwrap();
            assert_eq!(kb.objects_with(&[a]), names, "{attr}");
        }
    }

    #[test]
    fn index_agrees_with_objects() {
        let kb = load_kb(&sample_path()).unwrap();
        for a in Attribute::ALL {
            let brute: BTreeSet<String> = kb
                .objects()
                .filter(|o| o.get(a).is_some())
                .map(|o| o.name.clone())
                .collect();
            assert_eq!(kb.objects_with(&[a]), brute);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let kb = load_kb(&sample_path()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("kb.txt");
        kb.save(&p).unwrap();
        let again = load_kb(&p).unwrap();
        assert_eq!(kb, again);
        assert_eq!(kb.hash(), again.hash());
        for (a, b) in kb.objects().zip(again.objects()) {
            for (x, y) in a.attributes.values().zip(b.attributes.values()) {
                assert_eq!(x.quantity.magnitude().to_bits(), y.quantity.magnitude().to_bits());
            }
        }
    }

    #[test]
    fn union_of_attributes_intersects_selections() {
        let kb = load_kb(&sample_path()).unwrap();
        for a in Attribute::ALL {
            for b in Attribute::ALL {
                let both = kb.objects_with(&[a, b]);
                let inter: BTreeSet<String> = kb
                    .objects_with(&[a])
                    .intersection(&kb.objects_with(&[b]))
                    .cloned()
                    .collect();
                assert_eq!(both, inter);
            }
        }
    }
}
