//! Rotated surface-code qubit layout shared by the QCA bath and the QEC harness.
//!
//! Data qubits sit at odd coordinates `(2i+1, 2j+1)`, measure qubits at even
//! plaquette coordinates `(2i, 2j)`. `y` grows downwards.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StabKind {
    X,
    Z,
}

/// Diagonal neighbour offsets: top-left, top-right, bottom-left, bottom-right.
pub const CORNERS: [(i32, i32); 4] = [(-1, -1), (1, -1), (-1, 1), (1, 1)];

#[derive(Clone, Debug, Serialize)]
pub struct Stabilizer {
    pub coord: (i32, i32),
    pub kind: StabKind,
    /// Data qubit at each corner in `CORNERS` order, if present.
    pub corners: [Option<usize>; 4],
}

impl Stabilizer {
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.corners.iter().flatten().copied()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RotatedLayout {
    pub d: usize,
    /// Qubit `q < d²` is data qubit `q`; qubit `d² + s` is the measure qubit of stabilizer `s`.
    pub data: Vec<(i32, i32)>,
    pub stabilizers: Vec<Stabilizer>,
}

impl RotatedLayout {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 || d.is_multiple_of(2) {
            return invalid(format!("distance must be odd and at least 3, got {d}"));
        }
        let mut data = Vec::with_capacity(d * d);
        for j in 0..d {
            for i in 0..d {
                data.push((2 * i as i32 + 1, 2 * j as i32 + 1));
            }
        }
        let data_index = |x: i32, y: i32| -> Option<usize> {
            if x < 1 || y < 1 || x > 2 * d as i32 - 1 || y > 2 * d as i32 - 1 {
                return None;
            }
            Some(((y - 1) / 2) as usize * d + ((x - 1) / 2) as usize)
        };
        let mut stabilizers = Vec::with_capacity(d * d - 1);
        for j in 0..=d {
            for i in 0..=d {
                let kind = if (i + j) % 2 == 0 { StabKind::X } else { StabKind::Z };
                let side = i == 0 || i == d;
                let cap = j == 0 || j == d;
                let keep = match (side, cap) {
                    (false, false) => true,
                    (true, false) => kind == StabKind::Z,
                    (false, true) => kind == StabKind::X,
                    (true, true) => false,
                };
                if !keep {
                    continue;
                }
                let (x, y) = (2 * i as i32, 2 * j as i32);
                let corners = CORNERS.map(|(dx, dy)| data_index(x + dx, y + dy));
                stabilizers.push(Stabilizer { coord: (x, y), kind, corners });
            }
        }
        Ok(Self { d, data, stabilizers })
    }

    pub fn num_data(&self) -> usize {
        self.data.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.data.len() + self.stabilizers.len()
    }

    pub fn coord(&self, q: usize) -> (i32, i32) {
        if q < self.data.len() {
            self.data[q]
        } else {
            self.stabilizers[q - self.data.len()].coord
        }
    }

    pub fn is_data(&self, q: usize) -> bool {
        q < self.data.len()
    }

    /// Data qubits of the top row; `Z` on them is the logical `Z`.
    pub fn logical_z(&self) -> Vec<usize> {
        (0..self.d).collect()
    }

    /// Data qubits of the left column; `X` on them is the logical `X`.
    pub fn logical_x(&self) -> Vec<usize> {
        (0..self.d).map(|j| j * self.d).collect()
    }

    pub fn stabilizers_of(&self, kind: StabKind) -> impl Iterator<Item = (usize, &Stabilizer)> {
        self.stabilizers.iter().enumerate().filter(move |(_, s)| s.kind == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overlap(a: &[usize], b: &[usize]) -> usize {
        a.iter().filter(|q| b.contains(q)).count()
    }

    #[test]
    fn counts_and_commutation() {
        for d in [3, 5, 7, 9] {
            let l = RotatedLayout::new(d).unwrap();
            assert_eq!(l.num_qubits(), 2 * d * d - 1);
            assert_eq!(l.stabilizers_of(StabKind::X).count(), (d * d - 1) / 2);
            let supports: Vec<(StabKind, Vec<usize>)> =
                l.stabilizers.iter().map(|s| (s.kind, s.support().collect())).collect();
            for (ka, a) in &supports {
                assert!(a.len() == 2 || a.len() == 4);
                for (kb, b) in &supports {
                    if ka != kb {
                        assert_eq!(overlap(a, b) % 2, 0);
                    }
                }
                let other = if *ka == StabKind::X { l.logical_z() } else { l.logical_x() };
                assert_eq!(overlap(a, &other) % 2, 0);
            }
            assert_eq!(overlap(&l.logical_x(), &l.logical_z()), 1);
        }
        assert!(RotatedLayout::new(4).is_err());
    }
}
