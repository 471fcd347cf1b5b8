//! Label normalization and tokenization shared by indexing and querying.

/// Trims, case-folds and collapses internal whitespace runs to one space.
///
/// Labels are compared by this form and displayed by their raw form.
pub fn normalize_label(raw: &str) -> String {
    let folded = caseless::default_case_fold_str(raw);
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Lowercased maximal runs of alphanumeric characters.
///
/// No stemming and no stopword removal; never yields empty terms.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}
