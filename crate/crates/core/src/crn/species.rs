use std::fmt;
use std::str::FromStr;

use super::CrnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn suffix(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// A chemical species with structured identity.
///
/// Layer and unit indices are 1-based, with layer 1 the input layer, so
/// the first hidden layer's species are `I2,j` / `M2,j` / `H2,j` and the
/// outputs of an `N`-layer network are `HN,j`.
///
/// `Named` covers free-form species such as `A`, `B`, or `Y+`; a trailing
/// sign makes it half of a dual-rail pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Species {
    Input { index: usize, sign: Sign },
    Intermediate { layer: usize, unit: usize, sign: Sign },
    Mem { layer: usize, unit: usize },
    Hidden { layer: usize, unit: usize, sign: Sign },
    Waste,
    Named { name: String, sign: Option<Sign> },
}

impl Species {
    pub fn input(index: usize, sign: Sign) -> Self {
        Species::Input { index, sign }
    }

    pub fn intermediate(layer: usize, unit: usize, sign: Sign) -> Self {
        Species::Intermediate { layer, unit, sign }
    }

    pub fn mem(layer: usize, unit: usize) -> Self {
        Species::Mem { layer, unit }
    }

    pub fn hidden(layer: usize, unit: usize, sign: Sign) -> Self {
        Species::Hidden { layer, unit, sign }
    }

    /// Panics if `name` is not a valid species name; meant for literals.
    pub fn named(name: &str) -> Self {
        name.parse().expect("valid species name")
    }

    pub fn sign(&self) -> Option<Sign> {
        match self {
            Species::Input { sign, .. }
            | Species::Intermediate { sign, .. }
            | Species::Hidden { sign, .. } => Some(*sign),
            Species::Named { sign, .. } => *sign,
            Species::Mem { .. } | Species::Waste => None,
        }
    }

    /// The other half of this species' dual-rail pair, if it has one.
    pub fn partner(&self) -> Option<Species> {
        Some(match self {
            Species::Input { index, sign } => Species::Input {
                index: *index,
                sign: sign.flip(),
            },
            Species::Intermediate { layer, unit, sign } => Species::Intermediate {
                layer: *layer,
                unit: *unit,
                sign: sign.flip(),
            },
            Species::Hidden { layer, unit, sign } => Species::Hidden {
                layer: *layer,
                unit: *unit,
                sign: sign.flip(),
            },
            Species::Named {
                name,
                sign: Some(sign),
            } => Species::Named {
                name: name.clone(),
                sign: Some(sign.flip()),
            },
            _ => return None,
        })
    }

    /// Same identity with the sign flipped; unsigned species map to themselves.
    pub fn flipped(&self) -> Species {
        self.partner().unwrap_or_else(|| self.clone())
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Species::Input { index, sign } => write!(f, "X{index}{}", sign.suffix()),
            Species::Intermediate { layer, unit, sign } => {
                write!(f, "I{layer},{unit}{}", sign.suffix())
            }
            Species::Mem { layer, unit } => write!(f, "M{layer},{unit}"),
            Species::Hidden { layer, unit, sign } => {
                write!(f, "H{layer},{unit}{}", sign.suffix())
            }
            Species::Waste => f.write_str("W"),
            Species::Named { name, sign } => {
                f.write_str(name)?;
                if let Some(s) = sign {
                    write!(f, "{}", s.suffix())?;
                }
                Ok(())
            }
        }
    }
}

fn bad(name: &str) -> CrnError {
    CrnError::SpeciesName(name.to_string())
}

fn parse_index(s: &str, whole: &str) -> Result<usize, CrnError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || s.starts_with('0') {
        return Err(bad(whole));
    }
    s.parse().map_err(|_| bad(whole))
}

fn split_sign(s: &str) -> (&str, Option<Sign>) {
    if let Some(body) = s.strip_suffix('+') {
        (body, Some(Sign::Plus))
    } else if let Some(body) = s.strip_suffix('-') {
        (body, Some(Sign::Minus))
    } else {
        (s, None)
    }
}

impl FromStr for Species {
    type Err = CrnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "W" {
            return Ok(Species::Waste);
        }
        let (body, sign) = split_sign(s);
        let mut chars = body.chars();
        let head = chars.next().ok_or_else(|| bad(s))?;
        let rest = chars.as_str();
        // X1, I2,3, M2,3, H2,3: anything shaped like a structured name must
        // parse as one.
        let structured = matches!(head, 'X' | 'I' | 'M' | 'H')
            && rest.starts_with(|c: char| c.is_ascii_digit());
        if structured {
            return match head {
                'X' => Ok(Species::Input {
                    index: parse_index(rest, s)?,
                    sign: sign.ok_or_else(|| bad(s))?,
                }),
                _ => {
                    let (l, u) = rest.split_once(',').ok_or_else(|| bad(s))?;
                    let layer = parse_index(l, s)?;
                    let unit = parse_index(u, s)?;
                    match (head, sign) {
                        ('M', None) => Ok(Species::Mem { layer, unit }),
                        ('I', Some(sign)) => Ok(Species::Intermediate { layer, unit, sign }),
                        ('H', Some(sign)) => Ok(Species::Hidden { layer, unit, sign }),
                        _ => Err(bad(s)),
                    }
                }
            };
        }
        let ident = head.is_ascii_alphabetic() || head == '_';
        if !ident || !rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(bad(s));
        }
        if body == "W" {
            // "W+" would shadow the waste species
            return Err(bad(s));
        }
        Ok(Species::Named {
            name: body.to_string(),
            sign,
        })
    }
}
