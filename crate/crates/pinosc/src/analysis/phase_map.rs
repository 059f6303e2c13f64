//! (V, T) phase-map assembly from per-cell oscillation metrics.

use serde::Serialize;

use super::classify::PhaseClass;
use super::OscillationMetrics;

/// A rectangular (bias, temperature) grid of oscillation metrics. Missing
/// cells (failed runs) are explicit, never silently zero.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseMap {
    pub voltages: Vec<f64>,
    pub temperatures: Vec<f64>,
    /// Row-major `[t_idx * voltages.len() + v_idx]`.
    pub cells: Vec<Option<OscillationMetrics>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PhaseMapError {
    #[error("duplicate cell at V = {v}, T = {t}")]
    DuplicateCell { v: f64, t: f64 },
    #[error("cells do not form a complete rectangular grid: expected {expected}, got {got}")]
    IncompleteGrid { expected: usize, got: usize },
    #[error("no cells supplied")]
    Empty,
}

/// Bounding box of the stable region, in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub v_min: f64,
    pub v_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl PhaseMap {
    pub fn n_voltages(&self) -> usize {
        self.voltages.len()
    }

    pub fn n_temperatures(&self) -> usize {
        self.temperatures.len()
    }

    pub fn cell(&self, v_idx: usize, t_idx: usize) -> Option<&OscillationMetrics> {
        self.cells[t_idx * self.voltages.len() + v_idx].as_ref()
    }

    /// Strength matrix (units/Hz); missing cells are NaN.
    pub fn strength_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.temperatures.len())
            .map(|ti| {
                (0..self.voltages.len())
                    .map(|vi| self.cell(vi, ti).map_or(f64::NAN, |m| m.strength))
                    .collect()
            })
            .collect()
    }

    /// Class matrix codes; missing cells are "missing".
    pub fn class_matrix(&self) -> Vec<Vec<&'static str>> {
        (0..self.temperatures.len())
            .map(|ti| {
                (0..self.voltages.len())
                    .map(|vi| {
                        self.cell(vi, ti)
                            .map_or("missing", |m| m.phase_class.code())
                    })
                    .collect()
            })
            .collect()
    }

    /// Bounding box of cells classified stable; `None` when no cell is.
    pub fn stable_bounding_box(&self) -> Option<BoundingBox> {
        let mut b: Option<BoundingBox> = None;
        for ti in 0..self.temperatures.len() {
            for vi in 0..self.voltages.len() {
                if let Some(m) = self.cell(vi, ti) {
                    if m.phase_class == PhaseClass::Stable {
                        let (v, t) = (self.voltages[vi], self.temperatures[ti]);
                        b = Some(match b {
                            None => BoundingBox {
                                v_min: v,
                                v_max: v,
                                t_min: t,
                                t_max: t,
                            },
                            Some(bb) => BoundingBox {
                                v_min: bb.v_min.min(v),
                                v_max: bb.v_max.max(v),
                                t_min: bb.t_min.min(t),
                                t_max: bb.t_max.max(t),
                            },
                        });
                    }
                }
            }
        }
        b
    }

    /// Grid cell with the largest strength among non-absent cells.
    pub fn max_strength_cell(&self) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for ti in 0..self.temperatures.len() {
            for vi in 0..self.voltages.len() {
                if let Some(m) = self.cell(vi, ti) {
                    if m.phase_class != PhaseClass::Absent
                        && best.map_or(true, |(_, _, s)| m.strength > s)
                    {
                        best = Some((self.voltages[vi], self.temperatures[ti], m.strength));
                    }
                }
            }
        }
        best
    }

    /// Fraction of cells carrying data.
    pub fn coverage(&self) -> f64 {
        let present = self.cells.iter().filter(|c| c.is_some()).count();
        present as f64 / self.cells.len() as f64
    }
}

/// Assemble a phase map from `(V, T, metrics)` cells.
///
/// The cells must cover a complete rectangular grid (missing data passed as
/// `None`, never omitted); assembly is a pure function of the cell set,
/// independent of arrival order.
pub fn build_phase_map(
    cells: Vec<(f64, f64, Option<OscillationMetrics>)>,
) -> Result<PhaseMap, PhaseMapError> {
    if cells.is_empty() {
        return Err(PhaseMapError::Empty);
    }

    let mut voltages: Vec<f64> = Vec::new();
    let mut temperatures: Vec<f64> = Vec::new();
    for &(v, t, _) in &cells {
        insert_axis(&mut voltages, v);
        insert_axis(&mut temperatures, t);
    }

    let nv = voltages.len();
    let nt = temperatures.len();

    // Place cells first so duplicates are reported as duplicates rather
    // than as a grid-count mismatch.
    let mut grid: Vec<Option<Option<OscillationMetrics>>> = vec![None; nv * nt];
    for (v, t, m) in cells {
        let vi = axis_index(&voltages, v);
        let ti = axis_index(&temperatures, t);
        let slot = &mut grid[ti * nv + vi];
        if slot.is_some() {
            return Err(PhaseMapError::DuplicateCell { v, t });
        }
        *slot = Some(m);
    }
    if grid.iter().any(|c| c.is_none()) {
        return Err(PhaseMapError::IncompleteGrid {
            expected: nv * nt,
            got: grid.iter().filter(|c| c.is_some()).count(),
        });
    }

    Ok(PhaseMap {
        voltages,
        temperatures,
        cells: grid.into_iter().map(|c| c.unwrap()).collect(),
    })
}

/// Per temperature row, the maximum peak frequency among non-absent cells;
/// rows with no oscillating cell are omitted.
pub fn max_frequency_vs_temperature(map: &PhaseMap) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for ti in 0..map.temperatures.len() {
        let mut fmax: Option<f64> = None;
        for vi in 0..map.voltages.len() {
            if let Some(m) = map.cell(vi, ti) {
                if m.phase_class != PhaseClass::Absent {
                    fmax = Some(fmax.map_or(m.peak_frequency, |f: f64| f.max(m.peak_frequency)));
                }
            }
        }
        if let Some(f) = fmax {
            out.push((map.temperatures[ti], f));
        }
    }
    out
}

const AXIS_REL_TOL: f64 = 1e-9;

fn insert_axis(axis: &mut Vec<f64>, v: f64) {
    if axis.iter().any(|&a| close(a, v)) {
        return;
    }
    axis.push(v);
    axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

fn axis_index(axis: &[f64], v: f64) -> usize {
    axis.iter()
        .position(|&a| close(a, v))
        .expect("axis value present by construction")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= AXIS_REL_TOL * a.abs().max(b.abs()).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::classify::PhaseClass;

    fn metrics(class: PhaseClass, freq: f64, strength: f64) -> OscillationMetrics {
        OscillationMetrics {
            peak_frequency: freq,
            amplitude: strength * 1e5,
            linewidth: 1e5,
            strength,
            phase_class: class,
            fit_residual: 0.01,
        }
    }

    #[test]
    fn single_cell_map() {
        let map = build_phase_map(vec![(
            8.0,
            6.0,
            Some(metrics(PhaseClass::Stable, 2e6, 1.0)),
        )])
        .unwrap();
        assert_eq!(map.n_voltages(), 1);
        assert_eq!(map.n_temperatures(), 1);
        let bb = map.stable_bounding_box().unwrap();
        assert_eq!(
            (bb.v_min, bb.v_max, bb.t_min, bb.t_max),
            (8.0, 8.0, 6.0, 6.0)
        );
        assert_eq!(max_frequency_vs_temperature(&map), vec![(6.0, 2e6)]);
    }

    #[test]
    fn all_absent_has_no_island() {
        let mut cells = Vec::new();
        for &v in &[7.0, 8.0] {
            for &t in &[6.0, 10.0] {
                cells.push((v, t, Some(metrics(PhaseClass::Absent, 0.0, 0.0))));
            }
        }
        let map = build_phase_map(cells).unwrap();
        assert!(map.stable_bounding_box().is_none());
        assert!(max_frequency_vs_temperature(&map).is_empty());
    }

    #[test]
    fn duplicates_are_errors() {
        let cells = vec![
            (8.0, 6.0, Some(metrics(PhaseClass::Stable, 2e6, 1.0))),
            (8.0, 6.0, Some(metrics(PhaseClass::Absent, 0.0, 0.0))),
        ];
        assert!(matches!(
            build_phase_map(cells),
            Err(PhaseMapError::DuplicateCell { .. })
        ));
    }

    #[test]
    fn incomplete_grid_is_error() {
        let cells = vec![
            (8.0, 6.0, Some(metrics(PhaseClass::Stable, 2e6, 1.0))),
            (9.0, 6.0, None),
            (8.0, 10.0, None),
        ];
        assert!(matches!(
            build_phase_map(cells),
            Err(PhaseMapError::IncompleteGrid { .. })
        ));
    }

    #[test]
    fn assembly_is_order_invariant() {
        let mk = |order: &[usize]| {
            let mut base = vec![
                (8.0, 6.0, Some(metrics(PhaseClass::Stable, 2e6, 1.0))),
                (9.0, 6.0, Some(metrics(PhaseClass::Damped, 1e6, 0.1))),
                (8.0, 10.0, None),
                (9.0, 10.0, Some(metrics(PhaseClass::Absent, 0.0, 0.0))),
            ];
            let cells = order.iter().map(|&i| base[i].clone()).collect::<Vec<_>>();
            base.clear();
            build_phase_map(cells).unwrap()
        };
        let a = mk(&[0, 1, 2, 3]);
        let b = mk(&[3, 2, 1, 0]);
        assert_eq!(a.voltages, b.voltages);
        assert_eq!(a.temperatures, b.temperatures);
        assert_eq!(a.class_matrix(), b.class_matrix());
    }
}
