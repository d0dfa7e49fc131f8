//! Closed label sets and record attributes.
//!
//! Every enum here parses case-insensitively, with `-`, `_` and space treated
//! as the same separator, and prints in its canonical lowercase-hyphenated form.

use std::fmt;
use std::str::FromStr;

/// Folds a label string to the canonical comparison key.
fn fold(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            '_' | ' ' => '-',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

/// The raw string did not name any member of the label set.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! closed_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// Every value, in index order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownLabel;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let key = fold(s);
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == key)
                    .ok_or_else(|| UnknownLabel { kind: $kind, value: s.to_string() })
            }
        }
    };
}

closed_enum! {
    /// Language tag carried by every record.
    Language, "language" { En => "en", Es => "es" }
}

closed_enum! {
    /// Platform a text was collected from.
    Source, "source" { Twitter => "twitter", Gab => "gab" }
}

closed_enum! {
    /// Binary annotation.
    Task1Label, "task1 label" { Sexist => "sexist", NonSexist => "non-sexist" }
}

closed_enum! {
    /// Fine-grained annotation: `non-sexist` plus five sexist categories.
    Task2Label, "task2 label" {
        NonSexist => "non-sexist",
        IdeologicalInequality => "ideological-inequality",
        StereotypingDominance => "stereotyping-dominance",
        Objectification => "objectification",
        SexualViolence => "sexual-violence",
        MisogynyNonSexualViolence => "misogyny-non-sexual-violence",
    }
}

closed_enum! {
    /// Which annotation layer an operation works on.
    Task, "task" { Task1 => "task1", Task2 => "task2" }
}

impl Task2Label {
    /// The five categories a sexist text can receive, in classifier index order.
    pub const SEXIST_CATEGORIES: &'static [Task2Label] = &[
        Task2Label::IdeologicalInequality,
        Task2Label::StereotypingDominance,
        Task2Label::Objectification,
        Task2Label::SexualViolence,
        Task2Label::MisogynyNonSexualViolence,
    ];

    pub fn is_sexist(self) -> bool {
        self != Task2Label::NonSexist
    }

    /// Index among [`Task2Label::SEXIST_CATEGORIES`], `None` for `non-sexist`.
    pub fn category_index(self) -> Option<usize> {
        Self::SEXIST_CATEGORIES.iter().position(|&c| c == self)
    }

    pub fn from_category_index(index: usize) -> Option<Self> {
        Self::SEXIST_CATEGORIES.get(index).copied()
    }

    /// The binary label this category implies.
    pub fn task1(self) -> Task1Label {
        if self.is_sexist() {
            Task1Label::Sexist
        } else {
            Task1Label::NonSexist
        }
    }
}

impl Task {
    /// Canonical label strings of the full label set, in index order.
    pub fn label_names(self) -> Vec<&'static str> {
        match self {
            Task::Task1 => Task1Label::ALL.iter().map(|l| l.as_str()).collect(),
            Task::Task2 => Task2Label::ALL.iter().map(|l| l.as_str()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_and_separator_variants_parse() {
        assert_eq!("OBJECTIFICATION".parse(), Ok(Task2Label::Objectification));
        assert_eq!(
            "MISOGYNY_NON_SEXUAL_VIOLENCE".parse(),
            Ok(Task2Label::MisogynyNonSexualViolence)
        );
        assert_eq!("Ideological Inequality".parse(), Ok(Task2Label::IdeologicalInequality));
        assert_eq!("non_sexist".parse(), Ok(Task1Label::NonSexist));
        assert_eq!("Twitter".parse(), Ok(Source::Twitter));
        assert_eq!("ES".parse(), Ok(Language::Es));
    }

    #[test]
    fn unknown_label_is_rejected() {
        let err = "sexism".parse::<Task1Label>().unwrap_err();
        assert_eq!(err.kind, "task1 label");
        assert!("fr".parse::<Language>().is_err());
    }

    #[test]
    fn label_sets_have_expected_sizes() {
        assert_eq!(Task1Label::ALL.len(), 2);
        assert_eq!(Task2Label::ALL.len(), 6);
        assert_eq!(Task2Label::SEXIST_CATEGORIES.len(), 5);
        assert!(Task2Label::SEXIST_CATEGORIES.iter().all(|c| c.is_sexist()));
    }

    #[test]
    fn canonical_strings_round_trip() {
        for l in Task2Label::ALL {
            assert_eq!(l.as_str().parse::<Task2Label>().unwrap(), *l);
        }
        for (i, c) in Task2Label::SEXIST_CATEGORIES.iter().enumerate() {
            assert_eq!(c.category_index(), Some(i));
            assert_eq!(Task2Label::from_category_index(i), Some(*c));
        }
        assert_eq!(Task2Label::NonSexist.category_index(), None);
    }
}
