//! Objectual-integrity substrate: content-addressed capture bases,
//! task-oriented overlays, record validation, and mapping-driven
//! harmonization.
//!
//! Every object carries a self-addressing identifier (SAID): SHA-256 over
//! its canonical bytes computed with the `said` field holding the 64-zero
//! placeholder, then embedded. Because placeholder and digest have the same
//! byte length, embedding never changes the canonical shape, so the digest
//! is stable under recomputation and independent of field insertion order.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::authenticity::{verify_kel, AuthError, KeyEventLog, WitnessKeys};
use crate::canonical::{canonical_bytes, digest_canonical, sha256_hex, CanonicalError, Digest};

#[derive(Debug, thiserror::Error)]
pub enum SemanticsError {
    #[error("input is not a canonical self-addressed object: {0}")]
    NonCanonicalInput(String),
    #[error("overlay references a different capture base")]
    BaseMismatch,
    #[error("attribute {0:?} does not exist in the capture base")]
    UnknownAttribute(String),
    #[error("record references a different bundle")]
    BundleMismatch,
    #[error("no mapping for target attribute {0:?}")]
    UnmappedAttribute(String),
    #[error("record does not validate: {0:?}")]
    ValidationFailure(Vec<Violation>),
    #[error("overlay is not a mapping overlay")]
    NotAMapping,
    #[error("credential anchor event not found in issuer log")]
    CredentialAnchorMissing,
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error(transparent)]
    Auth(#[from] AuthError),
}

/// Attribute types captured at the base layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttrType {
    Text,
    Integer,
    Decimal,
    Boolean,
    Date,
    DigestReference,
}

/// The stable capture layer of a schema: attribute names, their types, and
/// the attributes flagged sensitive at capture time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureBase {
    pub attributes: BTreeMap<String, AttrType>,
    pub flagged: BTreeSet<String>,
    pub said: Digest,
}

impl CaptureBase {
    pub fn new(
        attributes: BTreeMap<String, AttrType>,
        flagged: BTreeSet<String>,
    ) -> Result<Self, SemanticsError> {
        for name in &flagged {
            if !attributes.contains_key(name) {
                return Err(SemanticsError::UnknownAttribute(name.clone()));
            }
        }
        let mut base = CaptureBase {
            attributes,
            flagged,
            said: Digest::placeholder(),
        };
        base.said = compute_said(&base)?;
        Ok(base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlayKind {
    Meaning,
    Label,
    Format,
    Encoding,
    Conformance,
    Mapping,
}

/// A task-oriented layer decorating a capture base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overlay {
    pub kind: OverlayKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub base_said: Digest,
    pub content: BTreeMap<String, serde_json::Value>,
    pub said: Digest,
}

impl Overlay {
    pub fn new(
        kind: OverlayKind,
        language: Option<String>,
        base: &CaptureBase,
        content: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self, SemanticsError> {
        for name in content.keys() {
            if !base.attributes.contains_key(name) {
                return Err(SemanticsError::UnknownAttribute(name.clone()));
            }
        }
        let mut overlay = Overlay {
            kind,
            language,
            base_said: base.said.clone(),
            content,
            said: Digest::placeholder(),
        };
        overlay.said = compute_said(&overlay)?;
        Ok(overlay)
    }
}

/// A capture base plus its overlay set, addressed by a digest over the
/// sorted member SAIDs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticBundle {
    pub capture_base: CaptureBase,
    pub overlays: Vec<Overlay>,
    pub bundle_said: Digest,
}

impl SemanticBundle {
    pub fn new(capture_base: CaptureBase) -> Result<Self, SemanticsError> {
        let mut bundle = SemanticBundle {
            capture_base,
            overlays: Vec::new(),
            bundle_said: Digest::placeholder(),
        };
        bundle.bundle_said = bundle.compute_bundle_said()?;
        Ok(bundle)
    }

    /// Digest over the sorted list of member SAIDs (base plus overlays), so
    /// overlay insertion order never matters.
    pub fn compute_bundle_said(&self) -> Result<Digest, SemanticsError> {
        let mut saids: Vec<&str> = self
            .overlays
            .iter()
            .map(|o| o.said.as_str())
            .chain(std::iter::once(self.capture_base.said.as_str()))
            .collect();
        saids.sort_unstable();
        Ok(digest_canonical(&saids)?)
    }

    pub fn overlays_of_kind(&self, kind: OverlayKind) -> impl Iterator<Item = &Overlay> {
        self.overlays.iter().filter(move |o| o.kind == kind)
    }
}

/// Attach an overlay to a bundle. Adding an overlay that is already present
/// is a no-op; the base SAID never changes.
pub fn add_overlay(bundle: &SemanticBundle, ov: Overlay) -> Result<SemanticBundle, SemanticsError> {
    if ov.base_said != bundle.capture_base.said {
        return Err(SemanticsError::BaseMismatch);
    }
    for name in ov.content.keys() {
        if !bundle.capture_base.attributes.contains_key(name) {
            return Err(SemanticsError::UnknownAttribute(name.clone()));
        }
    }
    let mut out = bundle.clone();
    if !out.overlays.iter().any(|o| o.said == ov.said) {
        out.overlays.push(ov);
        out.overlays.sort_by(|a, b| a.said.cmp(&b.said));
    }
    out.bundle_said = out.compute_bundle_said()?;
    Ok(out)
}

/// A row of values captured under a bundle's schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub bundle_said: Digest,
    pub values: BTreeMap<String, serde_json::Value>,
    pub said: Digest,
}

impl Record {
    pub fn new(
        bundle_said: Digest,
        values: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self, SemanticsError> {
        let mut record = Record {
            bundle_said,
            values,
            said: Digest::placeholder(),
        };
        record.said = compute_said(&record)?;
        Ok(record)
    }
}

/// A packaged claim inside a credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub attribute: String,
    pub value: serde_json::Value,
}

/// A record issued to a subject, bound to the issuer by the interaction
/// event that anchors the record digest in the issuer's log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Credential {
    pub record_said: Digest,
    pub issuer: Digest,
    pub subject: Digest,
    pub anchor_event: Digest,
    pub claims: Vec<Claim>,
}

impl Credential {
    /// Check the issuer binding: the issuer log verifies and contains the
    /// anchor event, and that event anchors the credential's record digest.
    pub fn verify_binding(&self, issuer_log: &KeyEventLog) -> Result<(), SemanticsError> {
        verify_kel(issuer_log, &[], 0, &WitnessKeys::empty())?;
        for event in &issuer_log.events {
            if event.event_digest()? == self.anchor_event {
                if event.anchors.contains(&self.record_said) {
                    return Ok(());
                }
                return Err(SemanticsError::CredentialAnchorMissing);
            }
        }
        Err(SemanticsError::CredentialAnchorMissing)
    }
}

trait SelfAddressed: Serialize + Clone {
    fn clear_said(&mut self);
}

impl SelfAddressed for CaptureBase {
    fn clear_said(&mut self) {
        self.said = Digest::placeholder();
    }
}

impl SelfAddressed for Overlay {
    fn clear_said(&mut self) {
        self.said = Digest::placeholder();
    }
}

impl SelfAddressed for Record {
    fn clear_said(&mut self) {
        self.said = Digest::placeholder();
    }
}

fn compute_said<T: SelfAddressed>(object: &T) -> Result<Digest, SemanticsError> {
    let mut blank = object.clone();
    blank.clear_said();
    Ok(sha256_hex(&canonical_bytes(&blank)?))
}

/// Recompute an object's SAID and compare it to the embedded one.
pub fn said_is_valid<T>(object: &T) -> bool
where
    T: Serialize + Clone + SaidCarrier,
{
    match compute_said_carrier(object) {
        Ok(d) => d == *object.said(),
        Err(_) => false,
    }
}

/// Public view of self-addressed objects, for verification helpers.
pub trait SaidCarrier: private::Sealed {
    fn said(&self) -> &Digest;
}

mod private {
    pub trait Sealed {}
    impl Sealed for super::CaptureBase {}
    impl Sealed for super::Overlay {}
    impl Sealed for super::Record {}
}

impl SaidCarrier for CaptureBase {
    fn said(&self) -> &Digest {
        &self.said
    }
}

impl SaidCarrier for Overlay {
    fn said(&self) -> &Digest {
        &self.said
    }
}

impl SaidCarrier for Record {
    fn said(&self) -> &Digest {
        &self.said
    }
}

fn compute_said_carrier<T: Serialize + Clone + SaidCarrier>(
    object: &T,
) -> Result<Digest, SemanticsError> {
    // Round-trip through JSON so the said field can be re-placeholdered
    // without a mutable accessor on the public trait.
    let value = serde_json::to_value(object)
        .map_err(|e| SemanticsError::NonCanonicalInput(e.to_string()))?;
    compute_said_value(value)
}

/// Compute the SAID of a serialized object: a JSON document whose top-level
/// `said` member holds either the placeholder or a previously embedded
/// digest. Field order in the input is irrelevant.
pub fn compute_said_bytes(bytes: &[u8]) -> Result<Digest, SemanticsError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| SemanticsError::NonCanonicalInput(e.to_string()))?;
    compute_said_value(value)
}

fn compute_said_value(mut value: serde_json::Value) -> Result<Digest, SemanticsError> {
    let object = value
        .as_object_mut()
        .ok_or_else(|| SemanticsError::NonCanonicalInput("not a JSON object".into()))?;
    match object.get("said").and_then(|v| v.as_str()) {
        Some(s) if Digest::parse(s).is_ok() => {}
        _ => {
            return Err(SemanticsError::NonCanonicalInput(
                "missing or malformed said field".into(),
            ))
        }
    }
    object.insert(
        "said".into(),
        serde_json::Value::String(Digest::placeholder().as_str().into()),
    );
    Ok(sha256_hex(&canonical_bytes(&value)?))
}

fn type_conforms(value: &serde_json::Value, ty: AttrType) -> bool {
    use serde_json::Value::*;
    match ty {
        AttrType::Text => matches!(value, String(_)),
        AttrType::Integer => matches!(value, Number(n) if n.is_i64() || n.is_u64()),
        AttrType::Decimal => matches!(value, Number(_)),
        AttrType::Boolean => matches!(value, Bool(_)),
        AttrType::Date => matches!(value, String(s) if is_plausible_date(s)),
        AttrType::DigestReference => matches!(value, String(s) if Digest::parse(s).is_ok()),
    }
}

fn is_plausible_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

/// One reason a record failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    TypeViolation { attribute: String },
    UnknownAttribute { attribute: String },
    RequiredMissing { attribute: String },
    DisallowedValue { attribute: String },
}

/// Constraints a conformance overlay may place on an attribute.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformanceRule {
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<serde_json::Value>>,
}

/// Validate a record against its bundle: base types first, then every
/// conformance overlay constraint. Returns all violations found.
pub fn validate_record(
    rec: &Record,
    bundle: &SemanticBundle,
) -> Result<Vec<Violation>, SemanticsError> {
    if rec.bundle_said != bundle.bundle_said {
        return Err(SemanticsError::BundleMismatch);
    }
    let mut violations = Vec::new();
    for (name, value) in &rec.values {
        match bundle.capture_base.attributes.get(name) {
            None => violations.push(Violation::UnknownAttribute {
                attribute: name.clone(),
            }),
            Some(ty) if !type_conforms(value, *ty) => violations.push(Violation::TypeViolation {
                attribute: name.clone(),
            }),
            Some(_) => {}
        }
    }
    for overlay in bundle.overlays_of_kind(OverlayKind::Conformance) {
        for (name, payload) in &overlay.content {
            let rule: ConformanceRule = serde_json::from_value(payload.clone())
                .map_err(|e| SemanticsError::NonCanonicalInput(e.to_string()))?;
            match rec.values.get(name) {
                None if rule.required => violations.push(Violation::RequiredMissing {
                    attribute: name.clone(),
                }),
                Some(value) => {
                    if let Some(allowed) = &rule.allowed {
                        if !allowed.contains(value) {
                            violations.push(Violation::DisallowedValue {
                                attribute: name.clone(),
                            });
                        }
                    }
                }
                None => {}
            }
        }
    }
    Ok(violations)
}

/// A harmonized record together with the sensitivity flags in effect for it:
/// the target base's own flags plus every flag propagated from the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harmonized {
    pub record: Record,
    pub flagged: BTreeSet<String>,
}

/// Transform a record from one bundle's shape into another via a mapping
/// overlay keyed by target attribute. Harmonization is total: every target
/// attribute must name a source attribute.
pub fn harmonize(
    rec: &Record,
    from: &SemanticBundle,
    to: &SemanticBundle,
    mapping: &Overlay,
) -> Result<Harmonized, SemanticsError> {
    if mapping.kind != OverlayKind::Mapping {
        return Err(SemanticsError::NotAMapping);
    }
    if mapping.base_said != to.capture_base.said {
        return Err(SemanticsError::BaseMismatch);
    }
    let input_violations = validate_record(rec, from)?;
    if !input_violations.is_empty() {
        return Err(SemanticsError::ValidationFailure(input_violations));
    }

    let mut values = BTreeMap::new();
    let mut flagged: BTreeSet<String> = to.capture_base.flagged.clone();
    for target in to.capture_base.attributes.keys() {
        let source = mapping
            .content
            .get(target)
            .and_then(|v| v.as_str())
            .ok_or_else(|| SemanticsError::UnmappedAttribute(target.clone()))?;
        if !from.capture_base.attributes.contains_key(source) {
            return Err(SemanticsError::UnmappedAttribute(target.clone()));
        }
        if let Some(value) = rec.values.get(source) {
            values.insert(target.clone(), value.clone());
        }
        if from.capture_base.flagged.contains(source) {
            flagged.insert(target.clone());
        }
    }

    let record = Record::new(to.bundle_said.clone(), values)?;
    let output_violations = validate_record(&record, to)?;
    if !output_violations.is_empty() {
        return Err(SemanticsError::ValidationFailure(output_violations));
    }
    Ok(Harmonized { record, flagged })
}

#[cfg(test)]
#[path = "semantics_tests.rs"]
mod tests;
