//! Empirical mapping from (object count, layout) to generator parameters.
//!
//! A sweep runs the generator over a grid of plane counts and solid
//! probabilities and records, per layout, how often each object count comes
//! out acceptable. For every requested count the table keeps the grid point
//! with the lowest expected generation time among those reliable enough to
//! succeed within the default attempt budget with probability 0.99; attempt
//! cost is modelled as `n^3` for `n` planes. Counts with no reliable point
//! take the point with the best success rate.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    assemble_objects, classify_layout, layout_satisfied, sample_planes, select_solids, usable_cells, Layout,
    SceneError, DEFAULT_MAX_ATTEMPTS, MAX_PLANES, MIN_PLANES,
};
use crate::arrangement::build_arrangement;
use crate::geom::{RngStream, EPS};

/// Target probability of succeeding within the default attempt budget.
const RELIABILITY: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub num_objects: usize,
    pub layout: Layout,
    pub num_planes: usize,
    pub prob_intersection: f64,
    /// Fraction of single attempts that produced an acceptable scene.
    pub success_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub entries: Vec<CalibrationEntry>,
}

static BUILTIN: OnceLock<CalibrationTable> = OnceLock::new();

impl CalibrationTable {
    /// Table shipped with the crate (`calibration.json`, produced by `calibrate`).
    pub fn builtin() -> &'static CalibrationTable {
        BUILTIN.get_or_init(|| {
            let mut table: CalibrationTable =
                serde_json::from_str(include_str!("calibration.json")).expect("builtin calibration table parses");
            table.make_monotone();
            table
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let mut table: CalibrationTable =
            serde_json::from_str(text).map_err(|e| SceneError::InvalidParams(format!("calibration table: {e}")))?;
        table.make_monotone();
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Plane counts never decrease with the object count within a layout.
    fn make_monotone(&mut self) {
        self.entries.sort_by_key(|e| (e.layout, e.num_objects));
        let mut floor: BTreeMap<Layout, usize> = BTreeMap::new();
        for e in &mut self.entries {
            let f = floor.entry(e.layout).or_insert(MIN_PLANES);
            e.num_planes = e.num_planes.max(*f);
            *f = e.num_planes;
        }
    }

    /// `(num_planes, prob_intersection)` for a request. Counts past the end of
    /// the table scale the plane count with the cube root of the object count,
    /// since bounded cells grow roughly with the cube of the plane count.
    pub fn lookup(&self, num_objects: usize, layout: Layout) -> (usize, f64) {
        let rows: Vec<&CalibrationEntry> = self.entries.iter().filter(|e| e.layout == layout).collect();
        if let Some(e) = rows.iter().find(|e| e.num_objects == num_objects) {
            return (e.num_planes, e.prob_intersection);
        }
        let Some(last) = rows.iter().filter(|e| e.num_objects <= num_objects).max_by_key(|e| e.num_objects) else {
            return (8, 0.3);
        };
        let scale = (num_objects as f64 / last.num_objects as f64).cbrt();
        let planes = ((last.num_planes as f64 * scale).ceil() as usize).clamp(last.num_planes, MAX_PLANES);
        (planes, last.prob_intersection)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationSweep {
    pub plane_counts: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub trials: usize,
    pub max_objects: usize,
    pub seed: u64,
}

impl Default for CalibrationSweep {
    fn default() -> Self {
        Self {
            plane_counts: (4..=30).step_by(2).collect(),
            probabilities: [0.005, 0.01, 0.02, 0.03, 0.04]
                .into_iter()
                .chain((1..=18).map(|i| i as f64 * 0.05))
                .collect(),
            trials: 1000,
            max_objects: 20,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPoint {
    pub num_planes: usize,
    pub prob_intersection: f64,
    pub layout: Layout,
    pub trials: usize,
    /// Acceptable object count → number of trials producing it.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn calibrate(sweep: &CalibrationSweep) -> Result<(Vec<GridPoint>, CalibrationTable), SceneError> {
    let per_planes: Vec<Vec<GridPoint>> = sweep
        .plane_counts
        .par_iter()
        .map(|&n| sweep_plane_count(sweep, n))
        .collect::<Result<_, _>>()?;
    let grid: Vec<GridPoint> = per_planes.into_iter().flatten().collect();

    let mut table = CalibrationTable::default();
    for layout in Layout::ALL {
        for k in 1..=sweep.max_objects {
            let rate = |g: &GridPoint| *g.histogram.get(&k).unwrap_or(&0) as f64 / g.trials as f64;
            let candidates: Vec<&GridPoint> = grid.iter().filter(|g| g.layout == layout).collect();
            let best = candidates.iter().map(|g| rate(g)).fold(0.0, f64::max);
            if best == 0.0 {
                continue;
            }
            let needed = 1.0 - (1.0 - RELIABILITY).powf(1.0 / DEFAULT_MAX_ATTEMPTS as f64);
            let expected_cost = |g: &GridPoint| (g.num_planes as f64).powi(3) / rate(g);
            let reliable = candidates.iter().filter(|g| rate(g) >= needed);
            let pick = reliable
                .min_by(|a, b| expected_cost(a).total_cmp(&expected_cost(b)).then(a.num_planes.cmp(&b.num_planes)))
                .or_else(|| candidates.iter().max_by(|a, b| rate(a).total_cmp(&rate(b)).then(b.num_planes.cmp(&a.num_planes))))
                .expect("candidates are non-empty");
            table.entries.push(CalibrationEntry {
                num_objects: k,
                layout,
                num_planes: pick.num_planes,
                prob_intersection: pick.prob_intersection,
                success_rate: rate(pick),
            });
        }
    }
    table.make_monotone();
    Ok((grid, table))
}

fn sweep_plane_count(sweep: &CalibrationSweep, n: usize) -> Result<Vec<GridPoint>, SceneError> {
    let mut points: Vec<GridPoint> = sweep
        .probabilities
        .iter()
        .flat_map(|&p| {
            Layout::ALL.map(|layout| GridPoint {
                num_planes: n,
                prob_intersection: p,
                layout,
                trials: sweep.trials,
                histogram: BTreeMap::new(),
            })
        })
        .collect();
    for trial in 0..sweep.trials {
        let mut rng = RngStream::with_stream(sweep.seed ^ (n as u64) << 32, trial as u64);
        let planes = sample_planes(&mut rng, n)?;
        let Ok(arr) = build_arrangement(&planes, EPS) else { continue };
        let usable = usable_cells(&arr);
        for (pi, &p) in sweep.probabilities.iter().enumerate() {
            let mut pick_rng = RngStream::with_stream(sweep.seed ^ (n as u64) << 32 ^ (pi as u64 + 1) << 20, trial as u64);
            let solids = select_solids(&usable, p, &mut pick_rng);
            if solids.len() > 4 * sweep.max_objects {
                continue;
            }
            for (li, layout) in Layout::ALL.into_iter().enumerate() {
                if let Ok(objects) = assemble_objects(&arr, &solids, layout) {
                    let found = classify_layout(&objects, arr.adjacency());
                    if layout_satisfied(layout, found, objects.len()) {
                        *points[pi * 3 + li].histogram.entry(objects.len()).or_default() += 1;
                    }
                }
            }
        }
    }
    Ok(points)
}
