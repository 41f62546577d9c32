//! Bounded single-spin observables used for correlations.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Constant { value: f64 },
    Tanh,
    /// Smoothed indicator of `[center - half_width, center + half_width]`
    /// with edges of width `softness`.
    Bump {
        center: f64,
        half_width: f64,
        softness: f64,
    },
}

impl Observable {
    pub const ONE: Observable = Observable::Constant { value: 1.0 };

    /// Smoothed indicator of `[0, 4]`. It is not even, so it sees the odd
    /// second mode as well as the even ones.
    pub const BUMP: Observable = Observable::Bump {
        center: 2.0,
        half_width: 2.0,
        softness: 0.1,
    };

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Observable::Constant { value } => value,
            Observable::Tanh => x.tanh(),
            Observable::Bump {
                center,
                half_width,
                softness,
            } => {
                let u = x - center;
                0.5 * (((u + half_width) / softness).tanh() - ((u - half_width) / softness).tanh())
            }
        }
    }

    /// Parses `one`, `tanh`, `bump` or `bump(center,half_width,softness)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "one" => return Ok(Self::ONE),
            "tanh" => return Ok(Self::Tanh),
            "bump" => return Ok(Self::BUMP),
            _ => {}
        }
        if let Some(args) = s.strip_prefix("bump(").and_then(|r| r.strip_suffix(')')) {
            let vals: Vec<f64> = args
                .split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidParameter(format!("bad bump arguments: {args}")))?;
            if let [center, half_width, softness] = vals[..] {
                if half_width > 0.0 && softness > 0.0 {
                    return Ok(Observable::Bump {
                        center,
                        half_width,
                        softness,
                    });
                }
            }
            return Err(Error::InvalidParameter(format!(
                "bump needs center, half_width > 0, softness > 0: {args}"
            )));
        }
        Err(Error::UnknownName(format!("observable {s}")))
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Constant { value } if *value == 1.0 => write!(f, "one"),
            Observable::Constant { value } => write!(f, "const({value})"),
            Observable::Tanh => write!(f, "tanh"),
            Observable::Bump {
                center,
                half_width,
                softness,
            } => write!(f, "bump({center},{half_width},{softness})"),
        }
    }
}
