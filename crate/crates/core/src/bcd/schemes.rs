use std::borrow::Cow;
use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::metrics::{evaluate_state, AllocationState};
use crate::problem::Problem;
use crate::scene::Scene;

use super::{
    check_certified_feasibility, improves, random_initial_state, random_phases, run_bcd, BcdRun,
    BcdSettings, BlockKind, Blocks, OuterRecord, TraceRow,
};

/// A named way of producing an operating point for one constraint level.
pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn describe(&self) -> &'static str;

    fn solve(&self, scene: &Scene, problem: &Problem, settings: &BcdSettings) -> Result<BcdRun>;

    /// The scene the returned states are evaluated on.
    fn evaluation_scene<'a>(&self, scene: &'a Scene) -> Result<Cow<'a, Scene>> {
        Ok(Cow::Borrowed(scene))
    }
}

/// RE split and power with the scene's fixed BD sequence.
pub struct Sp;

/// Full loop including the phase block, run from three starts: the SP point,
/// a random point, and the maximizer of the floored metric alone. The best
/// result under the (feasibility, objective) order is kept, ties going to
/// the SP start.
pub struct Spp;

/// SPP on the scene with every BD removed.
pub struct NoBd;

/// Radar on even symbols, data on odd ones; uniform power, fixed phases.
pub struct Tdma;

/// Radar on even subcarriers, data on odd ones; uniform power, fixed phases.
pub struct Fdma;

impl Scheme for Sp {
    fn name(&self) -> &'static str {
        "sp"
    }

    fn describe(&self) -> &'static str {
        "subcarrier and power optimization, fixed BD phases"
    }

    fn solve(&self, scene: &Scene, problem: &Problem, settings: &BcdSettings) -> Result<BcdRun> {
        check_certified_feasibility(scene, problem)?;
        let init = random_initial_state(scene, scene.fixed_phases.clone(), scene.config.seed)?;
        run_bcd(
            scene,
            problem,
            init,
            Blocks::FIXED_PHASE,
            settings,
            self.name(),
        )
    }
}

impl Scheme for Spp {
    fn name(&self) -> &'static str {
        "spp"
    }

    fn describe(&self) -> &'static str {
        "subcarrier, power and BD phase optimization"
    }

    fn solve(&self, scene: &Scene, problem: &Problem, settings: &BcdSettings) -> Result<BcdRun> {
        let start = Instant::now();
        let seed = scene.config.seed;
        let warm = || -> Result<BcdRun> {
            let first = Sp.solve(scene, problem, settings)?;
            let second = run_bcd(
                scene,
                problem,
                first.state.clone(),
                Blocks::FULL,
                settings,
                self.name(),
            )?;
            Ok(chain(first, second, start))
        };
        let cold = || -> Result<BcdRun> {
            let init = random_initial_state(scene, random_phases(scene, seed), seed)?;
            run_bcd(scene, problem, init, Blocks::FULL, settings, self.name())
        };
        let anchored = || -> Result<BcdRun> {
            let opposite = Problem {
                mode: problem.mode.other(),
                level: 0.0,
            };
            let corner = corner_split(scene, problem);
            let init = AllocationState::uniform(&scene.config, corner, random_phases(scene, seed))?;
            let first = run_bcd(scene, &opposite, init, Blocks::FULL, settings, self.name())?;
            let second = run_bcd(
                scene,
                problem,
                first.state.clone(),
                Blocks::FULL,
                settings,
                self.name(),
            )?;
            Ok(chain(first, second, start))
        };
        let (warm, (cold, anchored)) = rayon::join(warm, || rayon::join(cold, anchored));
        let runs = [
            ("sp-warm", warm?),
            ("random", cold?),
            ("anchored", anchored?),
        ];
        let starts = runs.iter().map(|(label, r)| r.summary(label)).collect();
        let rel = settings.feasibility_rel;
        let mut best = runs
            .into_iter()
            .map(|(_, r)| r)
            .reduce(|a, b| {
                let (sa, sb) = (problem.split(a.smi, a.rate), problem.split(b.smi, b.rate));
                if sb != sa && improves(problem, rel, sb, sa) {
                    b
                } else {
                    a
                }
            })
            .expect("three starts");
        best.starts = starts;
        best.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(best)
    }
}

/// Every RE on the floored metric's side: all data for (P1), all radar for (P2).
fn corner_split(scene: &Scene, problem: &Problem) -> Array2<bool> {
    Array2::from_elem(scene.grid.shape(), problem.mode == crate::problem::Mode::P2)
}

/// Concatenate two runs of which the second started from the first's result.
fn chain(first: BcdRun, second: BcdRun, start: Instant) -> BcdRun {
    let offset = first.outer_iters;
    let mut trace = first.trace;
    trace.extend(second.trace.into_iter().skip(1).map(|r| TraceRow {
        outer_iter: r.outer_iter + offset,
        ..r
    }));
    let mut outer = first.outer;
    outer.extend(second.outer.into_iter().map(|r| OuterRecord {
        outer_iter: r.outer_iter + offset,
        ..r
    }));
    BcdRun {
        trace,
        outer,
        outer_iters: offset + second.outer_iters,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        ..second
    }
}

impl Scheme for NoBd {
    fn name(&self) -> &'static str {
        "nobd"
    }

    fn describe(&self) -> &'static str {
        "full pipeline without BDs"
    }

    fn solve(&self, scene: &Scene, problem: &Problem, settings: &BcdSettings) -> Result<BcdRun> {
        let bare = scene.without_bds()?;
        let mut run = Spp.solve(&bare, problem, settings)?;
        run.scheme = self.name().to_string();
        Ok(run)
    }

    fn evaluation_scene<'a>(&self, scene: &'a Scene) -> Result<Cow<'a, Scene>> {
        Ok(Cow::Owned(scene.without_bds()?))
    }
}

fn fixed_split(
    scene: &Scene,
    problem: &Problem,
    radar: Array2<bool>,
    name: &str,
) -> Result<BcdRun> {
    let start = Instant::now();
    let state = AllocationState::uniform(&scene.config, radar, scene.fixed_phases.clone())?;
    let pair = evaluate_state(&state, scene)?;
    let (objective, constraint) = problem.split(pair.smi, pair.rate);
    let feasible = problem.satisfied(constraint, scene.config.tolerances.feasibility_rel);
    Ok(BcdRun {
        scheme: name.to_string(),
        problem: *problem,
        state,
        smi: pair.smi,
        rate: pair.rate,
        trace: vec![TraceRow {
            outer_iter: 0,
            block: BlockKind::Init,
            smi: pair.smi,
            rate: pair.rate,
            lambda: f64::NAN,
            rho: f64::NAN,
            accepted: true,
        }],
        outer: vec![OuterRecord {
            outer_iter: 0,
            problem: *problem,
            smi: pair.smi,
            rate: pair.rate,
            objective,
            feasible,
        }],
        converged: true,
        outer_iters: 0,
        feasible,
        seed: scene.config.seed,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        starts: Vec::new(),
    })
}

impl Scheme for Tdma {
    fn name(&self) -> &'static str {
        "tdma"
    }

    fn describe(&self) -> &'static str {
        "alternating symbols, uniform power, fixed phases"
    }

    fn solve(&self, scene: &Scene, problem: &Problem, _settings: &BcdSettings) -> Result<BcdRun> {
        let radar = Array2::from_shape_fn(scene.grid.shape(), |(m, _)| m % 2 == 0);
        fixed_split(scene, problem, radar, self.name())
    }
}

impl Scheme for Fdma {
    fn name(&self) -> &'static str {
        "fdma"
    }

    fn describe(&self) -> &'static str {
        "alternating subcarriers, uniform power, fixed phases"
    }

    fn solve(&self, scene: &Scene, problem: &Problem, _settings: &BcdSettings) -> Result<BcdRun> {
        let radar = Array2::from_shape_fn(scene.grid.shape(), |(_, n)| n % 2 == 0);
        fixed_split(scene, problem, radar, self.name())
    }
}

/// Schemes by name.
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Box<dyn Scheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(Spp));
        reg.register(Box::new(Sp));
        reg.register(Box::new(Tdma));
        reg.register(Box::new(Fdma));
        reg.register(Box::new(NoBd));
        reg
    }

    /// Replaces any scheme of the same name.
    pub fn register(&mut self, scheme: Box<dyn Scheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scheme> {
        self.schemes
            .get(name.trim().to_ascii_lowercase().as_str())
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownScheme {
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Scheme> {
        self.schemes.values().map(|s| s.as_ref())
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
