use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Kernel weighting functions supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Triangular,
    Uniform,
    Epanechnikov,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            Kernel::Triangular => (1.0 - a).max(0.0),
            Kernel::Uniform => {
                if a <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Epanechnikov => (0.75 * (1.0 - u * u)).max(0.0),
        }
    }

    /// `∫_0^1 u^k K(u) du`.
    pub fn moment(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Kernel::Uniform => 1.0 / (k + 1.0),
            Kernel::Triangular => 1.0 / (k + 1.0) - 1.0 / (k + 2.0),
            Kernel::Epanechnikov => 0.75 * (1.0 / (k + 1.0) - 1.0 / (k + 3.0)),
        }
    }

    /// `∫_0^1 u^k K(u)^2 du`.
    pub fn squared_moment(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Kernel::Uniform => 1.0 / (k + 1.0),
            Kernel::Triangular => 1.0 / (k + 1.0) - 2.0 / (k + 2.0) + 1.0 / (k + 3.0),
            Kernel::Epanechnikov => 0.5625 * (1.0 / (k + 1.0) - 2.0 / (k + 3.0) + 1.0 / (k + 5.0)),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Kernel::Triangular => "tri",
            Kernel::Uniform => "uni",
            Kernel::Epanechnikov => "epa",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Triangular => "triangular",
            Kernel::Uniform => "uniform",
            Kernel::Epanechnikov => "epanechnikov",
        })
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tri" | "triangular" => Ok(Kernel::Triangular),
            "uni" | "uniform" => Ok(Kernel::Uniform),
            "epa" | "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(format!(
                "unknown kernel `{other}` (expected tri, uni or epa)"
            )),
        }
    }
}
