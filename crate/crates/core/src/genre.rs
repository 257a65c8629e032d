//! The 18 treebank-level genre labels used by Universal Dependencies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Genre {
    Academic,
    Bible,
    Blog,
    Email,
    Fiction,
    Government,
    GrammarExamples,
    LearnerEssays,
    Legal,
    Medical,
    News,
    Nonfiction,
    Poetry,
    Reviews,
    Social,
    Spoken,
    Web,
    Wiki,
}

impl Genre {
    pub const COUNT: usize = 18;

    /// All genres in the fixed classifier output order.
    pub const ALL: [Genre; Genre::COUNT] = [
        Genre::Academic,
        Genre::Bible,
        Genre::Blog,
        Genre::Email,
        Genre::Fiction,
        Genre::Government,
        Genre::GrammarExamples,
        Genre::LearnerEssays,
        Genre::Legal,
        Genre::Medical,
        Genre::News,
        Genre::Nonfiction,
        Genre::Poetry,
        Genre::Reviews,
        Genre::Social,
        Genre::Spoken,
        Genre::Web,
        Genre::Wiki,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Genre> {
        Genre::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Academic => "academic",
            Genre::Bible => "bible",
            Genre::Blog => "blog",
            Genre::Email => "email",
            Genre::Fiction => "fiction",
            Genre::Government => "government",
            Genre::GrammarExamples => "grammar-examples",
            Genre::LearnerEssays => "learner-essays",
            Genre::Legal => "legal",
            Genre::Medical => "medical",
            Genre::News => "news",
            Genre::Nonfiction => "nonfiction",
            Genre::Poetry => "poetry",
            Genre::Reviews => "reviews",
            Genre::Social => "social",
            Genre::Spoken => "spoken",
            Genre::Web => "web",
            Genre::Wiki => "wiki",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genre {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let genre = match s {
            "grammar" => Genre::GrammarExamples,
            "learner" => Genre::LearnerEssays,
            _ => *Genre::ALL
                .iter()
                .find(|g| g.as_str() == s)
                .ok_or_else(|| Error::invalid(format!("unknown genre `{s}`")))?,
        };
        Ok(genre)
    }
}

/// A set of genres, stored as a bitmask over [`Genre::ALL`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct GenreSet(u32);

impl GenreSet {
    pub fn new() -> Self {
        GenreSet(0)
    }

    pub fn single(genre: Genre) -> Self {
        let mut set = GenreSet::new();
        set.insert(genre);
        set
    }

    pub fn insert(&mut self, genre: Genre) -> bool {
        let bit = 1 << genre.index();
        let fresh = self.0 & bit == 0;
        self.0 |= bit;
        fresh
    }

    pub fn contains(&self, genre: Genre) -> bool {
        self.0 & (1 << genre.index()) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn intersects(&self, other: &GenreSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Genre> + '_ {
        Genre::ALL.iter().copied().filter(|g| self.contains(*g))
    }

    /// The single member, if the set has exactly one.
    pub fn only(&self) -> Option<Genre> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }
}

impl FromIterator<Genre> for GenreSet {
    fn from_iter<I: IntoIterator<Item = Genre>>(iter: I) -> Self {
        let mut set = GenreSet::new();
        for g in iter {
            set.insert(g);
        }
        set
    }
}

impl fmt::Display for GenreSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(Genre::as_str).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for GenreSet {
    type Err = Error;

    /// Parses a comma-separated genre list.
    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .filter(|part| !part.trim().is_empty())
            .map(str::parse)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for g in Genre::ALL {
            assert_eq!(g.as_str().parse::<Genre>().unwrap(), g);
            assert_eq!(Genre::from_index(g.index()), Some(g));
        }
        assert_eq!("grammar".parse::<Genre>().unwrap(), Genre::GrammarExamples);
        assert!("sports".parse::<Genre>().is_err());
    }

    #[test]
    fn set_display_is_canonical() {
        let set: GenreSet = "wiki,news, news".parse().unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.to_string(), "news,wiki");
        assert_eq!(GenreSet::single(Genre::Spoken).only(), Some(Genre::Spoken));
    }
}
