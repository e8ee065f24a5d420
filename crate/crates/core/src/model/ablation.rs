use std::fmt;
use std::str::FromStr;

use crate::data::EncodedDocument;
use crate::error::{Error, Result};

/// Which side sources reach the network. The architecture is the same in
/// every mode; a removed source is fed as all-`<PAD>` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// News and comments, entities removed.
    NewsComments,
    /// News and entities, comments removed.
    NewsEntities,
    #[default]
    Full,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::NewsComments, Mode::NewsEntities, Mode::Full];

    pub fn apply(self, doc: &EncodedDocument) -> EncodedDocument {
        let mut out = doc.clone();
        match self {
            Mode::NewsComments => out.entities = doc.entities.blanked(),
            Mode::NewsEntities => out.comments = doc.comments.blanked(),
            Mode::Full => {}
        }
        out
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(' ', "").as_str() {
            "N+C" => Ok(Mode::NewsComments),
            "N+E" => Ok(Mode::NewsEntities),
            "N+C+E" | "N+E+C" | "FULL" => Ok(Mode::Full),
            _ => Err(Error::Contract(format!(
                "unknown mode `{s}` (expected N+C, N+E or N+C+E)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NewsComments => "N+C",
            Mode::NewsEntities => "N+E",
            Mode::Full => "N+C+E",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("N".parse::<Mode>().is_err());
    }
}
