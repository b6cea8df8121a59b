use std::fmt;
use std::str::FromStr;

/// Two-class tag. `Positive` is class C1 (the target, e.g. faces), `Negative` is C2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "1",
            Label::Negative => "-1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unrecognized class label {:?}", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "+1" | "pos" | "positive" => Ok(Label::Positive),
            "-1" | "0" | "2" | "neg" | "negative" => Ok(Label::Negative),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_spellings() {
        assert_eq!("+1".parse::<Label>().unwrap(), Label::Positive);
        assert_eq!(" neg ".parse::<Label>().unwrap(), Label::Negative);
        assert_eq!("2".parse::<Label>().unwrap(), Label::Negative);
        assert!("7".parse::<Label>().is_err());
        assert_eq!(Label::Negative.to_string().parse::<Label>().unwrap(), Label::Negative);
    }
}
