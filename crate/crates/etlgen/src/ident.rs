//! Identifiers with case- and accent-insensitive comparison.
//!
//! The input documents mix spellings freely (`Produit`/`produit`,
//! `Catégorie`/`categorie`), so identifiers compare on a folded form —
//! lowercased, French accents stripped — while storage and display keep
//! the original spelling.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// An identifier from a schema, star or mapping document.
#[derive(Debug, Clone)]
pub struct Ident {
    raw: String,
    folded: String,
}

impl Ident {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let folded = fold(&raw);
        Self { raw, folded }
    }

    /// The spelling as it appeared in the input document.
    pub fn as_str(&self) -> &str {
        &self.raw
    }

    /// The form used for comparison and hashing.
    pub fn folded(&self) -> &str {
        &self.folded
    }

    pub fn matches(&self, other: &str) -> bool {
        self.folded == fold(other)
    }
}

/// Lowercase and strip the Latin-1 accents the corpus uses. Only for
/// comparison; stored identifiers keep their accents.
pub fn fold(s: &str) -> String {
    s.chars()
        .flat_map(char::to_lowercase)
        .map(|c| match c {
            'à' | 'â' | 'ä' => 'a',
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'î' | 'ï' => 'i',
            'ô' | 'ö' => 'o',
            'ù' | 'û' | 'ü' => 'u',
            'ç' => 'c',
            other => other,
        })
        .collect()
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.folded == other.folded
    }
}

impl Eq for Ident {}

impl PartialOrd for Ident {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ident {
    fn cmp(&self, other: &Self) -> Ordering {
        self.folded.cmp(&other.folded).then_with(|| self.raw.cmp(&other.raw))
    }
}

impl Hash for Ident {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.folded.hash(state);
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

impl From<String> for Ident {
    fn from(s: String) -> Self {
        Ident::new(s)
    }
}

impl Borrow<str> for Ident {
    fn borrow(&self) -> &str {
        &self.raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case_and_accents() {
        assert_eq!(Ident::new("Catégorie"), Ident::new("categorie"));
        assert_eq!(Ident::new("Produit"), Ident::new("produit"));
        assert_eq!(Ident::new("désignation"), Ident::new("DESIGNATION"));
        assert_ne!(Ident::new("souscat"), Ident::new("catsup"));
    }

    #[test]
    fn display_keeps_original_spelling() {
        assert_eq!(Ident::new("Sous_Catégorie").to_string(), "Sous_Catégorie");
    }
}
