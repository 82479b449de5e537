use std::fmt;

/// Origin of a received packet.
///
/// `Bob` is the legitimate transmitter (null hypothesis), `Eve` the spoofer.
/// Numeric encoding for the linear models is fixed: Bob is -1, Eve is +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransmitterLabel {
    Bob,
    Eve,
}

impl TransmitterLabel {
    pub fn sign(self) -> f64 {
        match self {
            TransmitterLabel::Bob => -1.0,
            TransmitterLabel::Eve => 1.0,
        }
    }

    /// Maps a decision value to a label. Zero resolves to Bob.
    pub fn from_decision(value: f64) -> Self {
        if value > 0.0 {
            TransmitterLabel::Eve
        } else {
            TransmitterLabel::Bob
        }
    }

    /// Single-letter token used by the trace file format.
    pub fn token(self) -> &'static str {
        match self {
            TransmitterLabel::Bob => "B",
            TransmitterLabel::Eve => "E",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "B" => Some(TransmitterLabel::Bob),
            "E" => Some(TransmitterLabel::Eve),
            _ => None,
        }
    }

    pub fn is_eve(self) -> bool {
        self == TransmitterLabel::Eve
    }
}

impl fmt::Display for TransmitterLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransmitterLabel::Bob => write!(f, "Bob"),
            TransmitterLabel::Eve => write!(f, "Eve"),
        }
    }
}

/// True when both labels occur in `labels`.
pub fn has_both_classes(labels: &[TransmitterLabel]) -> bool {
    labels.iter().any(|l| l.is_eve()) && labels.iter().any(|l| !l.is_eve())
}
