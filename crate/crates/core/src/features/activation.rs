use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Relu,
    Tanh,
    #[serde(rename = "relu+tanh", alias = "relu-plus-tanh")]
    ReluPlusTanh,
    Identity,
    Custom,
}

impl ActivationKind {
    /// Stable numeric id used by the binary model container. Custom maps have none.
    pub fn id(self) -> Option<u16> {
        match self {
            ActivationKind::Relu => Some(1),
            ActivationKind::Tanh => Some(2),
            ActivationKind::ReluPlusTanh => Some(3),
            ActivationKind::Identity => Some(4),
            ActivationKind::Custom => None,
        }
    }

    pub fn from_id(id: u16) -> Option<Self> {
        match id {
            1 => Some(ActivationKind::Relu),
            2 => Some(ActivationKind::Tanh),
            3 => Some(ActivationKind::ReluPlusTanh),
            4 => Some(ActivationKind::Identity),
            _ => None,
        }
    }
}

/// A pointwise non-linearity with its derivative and the points where it is
/// not smooth.
#[derive(Clone)]
pub struct Activation {
    kind: ActivationKind,
    name: String,
    value: fn(f64) -> f64,
    derivative: fn(f64) -> f64,
    kinks: Vec<f64>,
}

impl fmt::Debug for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Activation")
            .field("name", &self.name)
            .field("kinks", &self.kinks)
            .finish()
    }
}

impl PartialEq for Activation {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

// subgradient 0 at the kink
fn relu_prime(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn tanh_prime(z: f64) -> f64 {
    let t = z.tanh();
    1.0 - t * t
}

impl Activation {
    pub fn relu() -> Self {
        Self::builtin(ActivationKind::Relu, "relu", relu, relu_prime, vec![0.0])
    }

    pub fn tanh() -> Self {
        Self::builtin(ActivationKind::Tanh, "tanh", f64::tanh, tanh_prime, Vec::new())
    }

    pub fn relu_plus_tanh() -> Self {
        Self::builtin(
            ActivationKind::ReluPlusTanh,
            "relu+tanh",
            |z| relu(z) + z.tanh(),
            |z| relu_prime(z) + tanh_prime(z),
            vec![0.0],
        )
    }

    pub fn identity() -> Self {
        Self::builtin(ActivationKind::Identity, "identity", |z| z, |_| 1.0, Vec::new())
    }

    /// A user-supplied scalar map. `kinks` lists points where the value is not
    /// smooth; Hermite quadrature splits the real line there.
    pub fn custom(name: impl Into<String>, value: fn(f64) -> f64, derivative: fn(f64) -> f64, kinks: Vec<f64>) -> Self {
        Self::builtin(ActivationKind::Custom, "", value, derivative, kinks).named(name.into())
    }

    fn builtin(kind: ActivationKind, name: &str, value: fn(f64) -> f64, derivative: fn(f64) -> f64, mut kinks: Vec<f64>) -> Self {
        kinks.sort_by(f64::total_cmp);
        Self {
            kind,
            name: name.to_string(),
            value,
            derivative,
            kinks,
        }
    }

    fn named(mut self, name: String) -> Self {
        self.name = name;
        self
    }

    pub fn from_kind(kind: ActivationKind) -> Option<Self> {
        match kind {
            ActivationKind::Relu => Some(Self::relu()),
            ActivationKind::Tanh => Some(Self::tanh()),
            ActivationKind::ReluPlusTanh => Some(Self::relu_plus_tanh()),
            ActivationKind::Identity => Some(Self::identity()),
            ActivationKind::Custom => None,
        }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        (self.value)(z)
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        (self.derivative)(z)
    }

    /// Values and derivatives over a slice in one pass. Built-in kinds are
    /// dispatched once per call so the scalar maps inline.
    pub fn evaluate(&self, pre: &[f64], values: &mut [f64], derivatives: &mut [f64]) {
        assert!(pre.len() == values.len() && pre.len() == derivatives.len());
        let zipped = pre.iter().zip(values.iter_mut()).zip(derivatives.iter_mut());
        match self.kind {
            ActivationKind::Relu => zipped.for_each(|((&z, v), g)| {
                *v = relu(z);
                *g = relu_prime(z);
            }),
            ActivationKind::Tanh => zipped.for_each(|((&z, v), g)| {
                let t = z.tanh();
                *v = t;
                *g = 1.0 - t * t;
            }),
            ActivationKind::ReluPlusTanh => zipped.for_each(|((&z, v), g)| {
                let t = z.tanh();
                *v = relu(z) + t;
                *g = relu_prime(z) + (1.0 - t * t);
            }),
            ActivationKind::Identity => zipped.for_each(|((&z, v), g)| {
                *v = z;
                *g = 1.0;
            }),
            ActivationKind::Custom => zipped.for_each(|((&z, v), g)| {
                *v = (self.value)(z);
                *g = (self.derivative)(z);
            }),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Self::relu()),
            "tanh" => Ok(Self::tanh()),
            "relu+tanh" | "relu-plus-tanh" | "relu_plus_tanh" => Ok(Self::relu_plus_tanh()),
            "identity" | "linear" => Ok(Self::identity()),
            other => Err(Error::InvalidArgument(format!("unknown activation '{other}'"))),
        }
    }
}
