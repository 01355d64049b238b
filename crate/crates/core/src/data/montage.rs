use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const MONTAGE_VERSION: &str = "montage_1020_v1";

const MONTAGE_TABLE: &str = include_str!("../../assets/montage_1020_v1.tsv");

/// Electrode positions on the unit sphere (x right, y nose, z vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    positions: BTreeMap<String, [f64; 3]>,
}

impl Montage {
    /// Builds a montage, normalizing every position onto the unit sphere.
    pub fn new(positions: impl IntoIterator<Item = (String, [f64; 3])>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, p) in positions {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Invariant(format!("electrode {name} has degenerate position")));
            }
            map.insert(name, [p[0] / norm, p[1] / norm, p[2] / norm]);
        }
        Ok(Montage { positions: map })
    }

    pub fn position(&self, name: &str) -> Option<[f64; 3]> {
        self.positions.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, [f64; 3])> {
        self.positions.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Positions for `names` in order, or the first missing name.
    pub fn positions_for(&self, names: &[String]) -> Result<Vec<[f64; 3]>> {
        names
            .iter()
            .map(|n| self.position(n).ok_or_else(|| Error::MissingPosition(n.clone())))
            .collect()
    }
}

fn table_rows() -> impl Iterator<Item = (String, f64, f64)> {
    MONTAGE_TABLE
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let mut cols = line.split_whitespace();
            let name = cols.next().expect("montage name").to_string();
            let polar: f64 = cols.next().and_then(|v| v.parse().ok()).expect("polar angle");
            let azimuth: f64 = cols.next().and_then(|v| v.parse().ok()).expect("azimuth");
            (name, polar, azimuth)
        })
}

/// The 30 channel names of the shipped montage, in recording order.
pub fn canonical_channel_names() -> Vec<String> {
    table_rows().map(|(n, _, _)| n).collect()
}

pub fn builtin_montage() -> Montage {
    let rows = table_rows().map(|(name, polar, azimuth)| {
        let (t, p) = (polar.to_radians(), azimuth.to_radians());
        (name, [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
    });
    Montage::new(rows).expect("shipped montage is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_unit_positions() {
        let m = builtin_montage();
        assert_eq!(m.len(), 30);
        assert_eq!(canonical_channel_names().len(), 30);
        for (name, p) in m.iter() {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "{name}: {norm}");
        }
    }

    #[test]
    fn cz_is_the_vertex() {
        let cz = builtin_montage().position("Cz").unwrap();
        assert!(cz[0].abs() < 1e-12 && cz[1].abs() < 1e-12 && (cz[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homologous_pairs_mirror_in_x() {
        let m = builtin_montage();
        let pairs = [
            ("Fp1", "Fp2"), ("F7", "F8"), ("F3", "F4"), ("FT7", "FT8"), ("FC3", "FC4"),
            ("T7", "T8"), ("C3", "C4"), ("TP7", "TP8"), ("CP3", "CP4"), ("P7", "P8"),
            ("P3", "P4"), ("O1", "O2"),
        ];
        for (l, r) in pairs {
            let (a, b) = (m.position(l).unwrap(), m.position(r).unwrap());
            assert!((a[0] + b[0]).abs() < 1e-9, "{l}/{r} x");
            assert!((a[1] - b[1]).abs() < 1e-9, "{l}/{r} y");
            assert!((a[2] - b[2]).abs() < 1e-9, "{l}/{r} z");
        }
    }
}
