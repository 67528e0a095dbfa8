//! Slot substitution for cloze templates.
//!
//! Substitution is positional and happens in one pass, so a subject label
//! that itself contains `[Y]` is never substituted a second time.

use crate::types::{OBJECT_SLOT, SUBJECT_SLOT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {0:?} must contain [X] and [Y] exactly once")]
    Slots(String),
    #[error("template {0:?} places [Y] before [X]")]
    Order(String),
}

fn slots(template: &str) -> Result<(usize, usize), TemplateError> {
    let single = |slot: &str| {
        let mut it = template.match_indices(slot);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    };
    match (single(SUBJECT_SLOT), single(OBJECT_SLOT)) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(TemplateError::Slots(template.to_string())),
    }
}

/// The generation prompt: the template up to `[Y]` with the subject filled
/// in and trailing whitespace removed.
pub fn prompt(template: &str, subject: &str) -> Result<String, TemplateError> {
    let (x, y) = slots(template)?;
    if y < x {
        return Err(TemplateError::Order(template.to_string()));
    }
    let mut out = String::with_capacity(y + subject.len());
    out.push_str(&template[..x]);
    out.push_str(subject);
    out.push_str(&template[x + SUBJECT_SLOT.len()..y]);
    Ok(out.trim_end().to_string())
}

/// The template with both slots filled.
pub fn fill(template: &str, subject: &str, object: &str) -> Result<String, TemplateError> {
    let (x, y) = slots(template)?;
    let mut parts = [(x, SUBJECT_SLOT.len(), subject), (y, OBJECT_SLOT.len(), object)];
    parts.sort_by_key(|p| p.0);
    let mut out = String::new();
    let mut at = 0;
    for (pos, len, value) in parts {
        out.push_str(&template[at..pos]);
        out.push_str(value);
        at = pos + len;
    }
    out.push_str(&template[at..]);
    Ok(out)
}
