//! Multipath channel generation and effective-channel composition.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{
    distance, BdHost, BistaticCascade, Geometry, OfdmGrid, RcsMode, SceneConfig, SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};

/// Complex M x N grid indexed `[m, n]` (symbol, subcarrier).
pub type CGrid = Array2<Complex64>;

/// Draw from `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub amplitude: Complex64,
    /// Seconds.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
}

/// The propagation paths of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    /// Build a path set, rejecting empty sets and delays outside `[0, T_G)`.
    pub fn new(paths: Vec<Path>, guard_duration: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Domain("a link needs at least one path".into()));
        }
        for p in &paths {
            if !(p.delay >= 0.0) {
                return Err(Error::Domain(format!("negative path delay {}", p.delay)));
            }
            if p.delay >= guard_duration {
                return Err(Error::DelayExceedsGuard {
                    delay: p.delay,
                    guard: guard_duration,
                });
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    /// `H(m, n) = sum_l A_l exp(-j 2 pi f_n tau_l) exp(j 2 pi f_D,l t_m)`.
    pub fn frequency_response(&self, grid: &OfdmGrid) -> CGrid {
        let two_pi = std::f64::consts::TAU;
        let mut h = CGrid::zeros(grid.shape());
        for p in &self.paths {
            let freq: Vec<Complex64> = grid
                .subcarrier_frequencies
                .iter()
                .map(|&f| Complex64::from_polar(1.0, -two_pi * f * p.delay))
                .collect();
            for (m, &t) in grid.symbol_start_times.iter().enumerate() {
                let time = Complex64::from_polar(1.0, two_pi * p.doppler * t) * p.amplitude;
                for (n, &e) in freq.iter().enumerate() {
                    h[[m, n]] += time * e;
                }
            }
        }
        h
    }
}

/// Channels of the k-th BD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdChannels {
    /// `H_bk`: BS to BD.
    pub bs_bd: CGrid,
    /// `H_ku`: BD to user.
    pub bd_user: CGrid,
    /// `H_sk`: sensing transmitter to BD. The monostatic transmitter is the
    /// BS, so this is the same link as `bs_bd`.
    pub sense_bd: CGrid,
    /// `H_kt`: BD to target (also `H_tk` by reciprocity).
    pub bd_target: CGrid,
    /// `H_kr`: BD to the bistatic sensing receiver.
    pub bd_rx: Option<CGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `H_bu`
    pub bs_user: CGrid,
    /// `H_st`
    pub bs_target: CGrid,
    /// `H_tr`, bistatic only.
    pub target_rx: Option<CGrid>,
    pub bds: Vec<BdChannels>,
}

impl ChannelSet {
    pub fn num_bds(&self) -> usize {
        self.bds.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.bs_user.dim()
    }

    pub fn all_finite(&self) -> bool {
        let mut grids: Vec<&CGrid> = vec![&self.bs_user, &self.bs_target];
        grids.extend(self.target_rx.iter());
        for bd in &self.bds {
            grids.extend([&bd.bs_bd, &bd.bd_user, &bd.sense_bd, &bd.bd_target]);
            grids.extend(bd.bd_rx.iter());
        }
        grids
            .iter()
            .all(|g| g.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Direct and per-BD cascade terms of both effective channels, with the
    /// BD attenuation folded in.
    pub fn cascade_terms(&self, config: &SceneConfig) -> Result<CascadeTerms> {
        let alphas = config.attenuations();
        if alphas.len() != self.bds.len() {
            return Err(Error::Shape(format!(
                "{} attenuations for {} BDs",
                alphas.len(),
                self.bds.len()
            )));
        }
        let (comm_direct, sense_direct) = (self.bs_user.clone(), self.sense_direct(config)?);
        let mut comm_bd = Vec::with_capacity(self.bds.len());
        let mut sense_bd = Vec::with_capacity(self.bds.len());
        for (bd, &alpha) in self.bds.iter().zip(&alphas) {
            comm_bd.push((&bd.bs_bd * &bd.bd_user).mapv(|z| z * alpha));
            let sense = match config.geometry {
                Geometry::Monostatic => &bd.sense_bd * &bd.bd_target,
                Geometry::Bistatic => {
                    let rx = bd.bd_rx.as_ref().ok_or_else(|| {
                        Error::Shape("bistatic geometry needs BD-to-receiver channels".into())
                    })?;
                    match config.bistatic.cascade {
                        BistaticCascade::ThroughTarget => &(&self.bs_target * &bd.bd_target) * rx,
                        BistaticCascade::Direct => &bd.sense_bd * rx,
                    }
                }
            };
            sense_bd.push(sense.mapv(|z| z * alpha));
        }
        Ok(CascadeTerms {
            comm_direct,
            comm_bd,
            sense_direct,
            sense_bd,
        })
    }

    fn sense_direct(&self, config: &SceneConfig) -> Result<CGrid> {
        match config.geometry {
            Geometry::Monostatic => Ok(self.bs_target.clone()),
            Geometry::Bistatic => {
                let tr = self.target_rx.as_ref().ok_or_else(|| {
                    Error::Shape("bistatic geometry needs the target-to-receiver channel".into())
                })?;
                Ok(&self.bs_target * tr)
            }
        }
    }
}

/// `H_c = comm_direct + sum_k x_k comm_bd[k]`, `G = sense_direct + sum_k x_k sense_bd[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTerms {
    pub comm_direct: CGrid,
    pub comm_bd: Vec<CGrid>,
    pub sense_direct: CGrid,
    pub sense_bd: Vec<CGrid>,
}

impl CascadeTerms {
    pub fn num_bds(&self) -> usize {
        self.comm_bd.len()
    }

    pub fn compose(&self, phases: &PhaseMatrix) -> Result<EffectiveChannels> {
        let (m_sym, _) = self.comm_direct.dim();
        if phases.num_bds() != self.num_bds() || phases.num_symbols() != m_sym {
            return Err(Error::Shape(format!(
                "phase matrix is {}x{}, expected {}x{}",
                phases.num_bds(),
                phases.num_symbols(),
                self.num_bds(),
                m_sym
            )));
        }
        let mut comm = self.comm_direct.clone();
        let mut sense = self.sense_direct.clone();
        for k in 0..self.num_bds() {
            for m in 0..m_sym {
                let x = f64::from(phases.sign(k, m));
                comm.row_mut(m)
                    .scaled_add(Complex64::new(x, 0.0), &self.comm_bd[k].row(m));
                sense
                    .row_mut(m)
                    .scaled_add(Complex64::new(x, 0.0), &self.sense_bd[k].row(m));
            }
        }
        Ok(EffectiveChannels { comm, sense })
    }
}

/// BD phase decisions as signs `x_{k,m} = +-1`; `phi = 0` for `+1`, `pi` for `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMatrix {
    signs: Array2<i8>,
}

impl PhaseMatrix {
    pub fn all_zero_phase(num_bds: usize, num_symbols: usize) -> Self {
        Self {
            signs: Array2::from_elem((num_bds, num_symbols), 1),
        }
    }

    pub fn from_signs(signs: Array2<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Domain("phase signs must be +1 or -1".into()));
        }
        Ok(Self { signs })
    }

    pub fn from_rows(rows: &[Vec<i8>], num_symbols: usize) -> Result<Self> {
        let mut signs = Array2::zeros((rows.len(), num_symbols));
        for (k, row) in rows.iter().enumerate() {
            if row.len() != num_symbols {
                return Err(Error::Shape(format!(
                    "phase row {k} has {} entries",
                    row.len()
                )));
            }
            for (m, &s) in row.iter().enumerate() {
                signs[[k, m]] = s;
            }
        }
        Self::from_signs(signs)
    }

    /// Same sign vector on every symbol.
    pub fn from_frame_vector(x: &[i8], num_symbols: usize) -> Result<Self> {
        let rows: Vec<Vec<i8>> = x.iter().map(|&s| vec![s; num_symbols]).collect();
        Self::from_rows(&rows, num_symbols)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_bds: usize, num_symbols: usize) -> Self {
        let signs = Array2::from_shape_fn((num_bds, num_symbols), |_| {
            if rng.random::<bool>() {
                1
            } else {
                -1
            }
        });
        Self { signs }
    }

    pub fn num_bds(&self) -> usize {
        self.signs.nrows()
    }

    pub fn num_symbols(&self) -> usize {
        self.signs.ncols()
    }

    pub fn sign(&self, k: usize, m: usize) -> i8 {
        self.signs[[k, m]]
    }

    pub fn set_sign(&mut self, k: usize, m: usize, s: i8) {
        debug_assert!(s == 1 || s == -1);
        self.signs[[k, m]] = s;
    }

    /// `phi_{k,m} = (pi / 2)(1 - x_{k,m})`.
    pub fn phase(&self, k: usize, m: usize) -> f64 {
        std::f64::consts::FRAC_PI_2 * (1.0 - f64::from(self.sign(k, m)))
    }

    /// Column `m` as a sign vector over BDs.
    pub fn symbol_vector(&self, m: usize) -> Vec<i8> {
        self.signs.column(m).to_vec()
    }

    pub fn set_symbol_vector(&mut self, m: usize, x: &[i8]) {
        for (k, &s) in x.iter().enumerate() {
            self.set_sign(k, m, s);
        }
    }

    pub fn signs(&self) -> &Array2<i8> {
        &self.signs
    }

    /// Number of differing entries.
    pub fn hamming(&self, other: &PhaseMatrix) -> usize {
        self.signs
            .iter()
            .zip(other.signs.iter())
            .filter(|(a, b)| a != b)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// `H_c`
    pub comm: CGrid,
    /// `G`
    pub sense: CGrid,
}

/// Compose `H_c` and `G` for a phase assignment.
pub fn compose_effective_channels(
    channels: &ChannelSet,
    phases: &PhaseMatrix,
    config: &SceneConfig,
) -> Result<EffectiveChannels> {
    channels.cascade_terms(config)?.compose(phases)
}

fn link_paths<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SceneConfig,
    grid: &OfdmGrid,
    dist: f64,
) -> Result<PathSet> {
    let ch = &config.channel;
    let variance = (ch.reference_distance_m / dist.max(1e-3)).powf(ch.path_loss_exponent);
    let base = dist / SPEED_OF_LIGHT;
    let mut excess = vec![0.0f64; ch.paths_per_link];
    for e in excess.iter_mut().skip(1) {
        *e = if ch.delay_spread_s > 0.0 {
            // inverse CDF of an exponential truncated at max_excess_delay_s
            let u: f64 = rng.random();
            let tail = 1.0 - (-ch.max_excess_delay_s / ch.delay_spread_s).exp();
            -ch.delay_spread_s * (1.0 - u * tail).ln()
        } else {
            0.0
        };
    }
    let weights: Vec<f64> = excess
        .iter()
        .map(|&e| {
            if ch.delay_spread_s > 0.0 {
                (-e / ch.delay_spread_s).exp()
            } else {
                1.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let paths = excess
        .iter()
        .zip(&weights)
        .map(|(&e, &w)| {
            let amplitude = complex_gaussian(rng, variance * w / total);
            let doppler = if ch.max_doppler_hz > 0.0 {
                rng.random_range(-ch.max_doppler_hz..=ch.max_doppler_hz)
            } else {
                0.0
            };
            Path {
                amplitude,
                delay: base + e,
                doppler,
            }
        })
        .collect();
    PathSet::new(paths, grid.guard_duration)
}

/// Placement of the BDs around their host, meters.
pub fn place_bds<R: Rng + ?Sized>(rng: &mut R, config: &SceneConfig) -> Vec<[f64; 2]> {
    let pos = config.entity_positions();
    let host = match config.bds.host {
        BdHost::Bs => pos.bs,
        BdHost::User => pos.user,
        BdHost::Target => pos.target,
    };
    let [lo, hi] = config.bds.activity_range_m;
    (0..config.bds.count)
        .map(|_| {
            let r = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            [host[0] + r * theta.cos(), host[1] + r * theta.sin()]
        })
        .collect()
}

/// Random Rayleigh multipath channels for every link of the scene.
pub fn generate_channels(config: &SceneConfig, rng_seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let grid = config.ofdm_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pos = config.entity_positions();
    let bd_pos = place_bds(&mut rng, config);

    let link = |rng: &mut ChaCha8Rng, a: [f64; 2], b: [f64; 2]| -> Result<CGrid> {
        Ok(link_paths(rng, config, &grid, distance(a, b))?.frequency_response(&grid))
    };

    let bs_user = link(&mut rng, pos.bs, pos.user)?;
    let bs_target = link(&mut rng, pos.bs, pos.target)?;
    let mut bds = Vec::with_capacity(bd_pos.len());
    for &p in &bd_pos {
        let bs_bd = link(&mut rng, pos.bs, p)?;
        let bd_user = link(&mut rng, p, pos.user)?;
        let bd_target = link(&mut rng, p, pos.target)?;
        bds.push(BdChannels {
            sense_bd: bs_bd.clone(),
            bs_bd,
            bd_user,
            bd_target,
            bd_rx: None,
        });
    }
    // Bistatic links are drawn last so monostatic draws do not depend on geometry.
    let target_rx = if config.geometry == Geometry::Bistatic {
        let tr = link(&mut rng, pos.target, pos.rx)?;
        for (bd, &p) in bds.iter_mut().zip(&bd_pos) {
            bd.bd_rx = Some(link(&mut rng, p, pos.rx)?);
        }
        Some(tr)
    } else {
        None
    };
    let set = ChannelSet {
        bs_user,
        bs_target,
        target_rx,
        bds,
    };
    debug_assert!(set.all_finite());
    Ok(set)
}

/// Target reflection coefficient `alpha_t`.
pub fn sample_rcs<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R) -> Complex64 {
    match config.rcs_mode {
        RcsMode::DeterministicExpected => Complex64::new(config.rcs_variance.sqrt(), 0.0),
        RcsMode::Sampled => complex_gaussian(rng, config.rcs_variance),
    }
}

/// A fully instantiated scene: configuration, channels, RCS draw and the
/// fixed BD sequence used by fixed-phase schemes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub grid: OfdmGrid,
    pub channels: ChannelSet,
    pub terms: CascadeTerms,
    pub rcs: Complex64,
    pub fixed_phases: PhaseMatrix,
}

impl Scene {
    pub fn build(config: &SceneConfig) -> Result<Self> {
        Self::with_seed(config, config.seed)
    }

    pub fn with_seed(config: &SceneConfig, seed: u64) -> Result<Self> {
        let channels = generate_channels(config, seed)?;
        Self::from_channels(config, channels, seed)
    }

    /// Wrap externally supplied channels. `seed` drives the RCS draw and the
    /// fixed BD sequence when the config does not pin one.
    pub fn from_channels(config: &SceneConfig, channels: ChannelSet, seed: u64) -> Result<Self> {
        config.validate()?;
        let grid = config.ofdm_grid()?;
        if channels.shape() != grid.shape() {
            return Err(Error::Shape(format!(
                "channels are {:?}, grid is {:?}",
                channels.shape(),
                grid.shape()
            )));
        }
        if channels.num_bds() != config.bds.count {
            return Err(Error::Shape(format!(
                "{} BD channel sets for {} BDs",
                channels.num_bds(),
                config.bds.count
            )));
        }
        let terms = channels.cascade_terms(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fbd_u64);
        let rcs = sample_rcs(config, &mut rng);
        let fixed_phases = match &config.bds.fixed_sequence {
            Some(rows) => PhaseMatrix::from_rows(rows, grid.num_symbols)?,
            None => PhaseMatrix::random(&mut rng, config.bds.count, grid.num_symbols),
        };
        Ok(Self {
            config: config.clone(),
            grid,
            channels,
            terms,
            rcs,
            fixed_phases,
        })
    }

    /// `|alpha_t|^2`
    pub fn rcs_gain(&self) -> f64 {
        self.rcs.norm_sqr()
    }

    pub fn num_bds(&self) -> usize {
        self.channels.num_bds()
    }

    pub fn effective(&self, phases: &PhaseMatrix) -> Result<EffectiveChannels> {
        self.terms.compose(phases)
    }

    /// The same scene with every BD removed.
    pub fn without_bds(&self) -> Result<Self> {
        let mut config = self.config.clone();
        config.bds.count = 0;
        config.bds.attenuations = None;
        config.bds.fixed_sequence = None;
        let mut channels = self.channels.clone();
        channels.bds.clear();
        let terms = channels.cascade_terms(&config)?;
        Ok(Self {
            config,
            grid: self.grid.clone(),
            channels,
            terms,
            rcs: self.rcs,
            fixed_phases: PhaseMatrix::all_zero_phase(0, self.grid.num_symbols),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(k: usize) -> SceneConfig {
        let mut cfg = SceneConfig::default();
        cfg.grid.num_subcarriers = 8;
        cfg.grid.num_symbols = 3;
        cfg.bds.count = k;
        cfg
    }

    #[test]
    fn single_unit_path_is_flat() {
        let grid = small_config(0).ofdm_grid().unwrap();
        let ps = PathSet::new(
            vec![Path {
                amplitude: Complex64::new(1.0, 0.0),
                delay: 0.0,
                doppler: 0.0,
            }],
            grid.guard_duration,
        )
        .unwrap();
        let h = ps.frequency_response(&grid);
        assert!(h
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn pure_delay_is_linear_phase() {
        let grid = small_config(0).ofdm_grid().unwrap();
        let n = grid.num_subcarriers as f64;
        let tau = 1.0 / (n * grid.subcarrier_spacing);
        let ps = PathSet::new(
            vec![Path {
                amplitude: Complex64::new(1.0, 0.0),
                delay: tau,
                doppler: 0.0,
            }],
            grid.guard_duration,
        )
        .unwrap();
        let h = ps.frequency_response(&grid);
        for ((_, nn), z) in h.indexed_iter() {
            let expected = Complex64::from_polar(
                1.0,
                -std::f64::consts::TAU * grid.subcarrier_frequencies[nn] * tau,
            );
            assert!((z - expected).norm() < 1e-12);
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delay_beyond_guard_rejected() {
        let grid = small_config(0).ofdm_grid().unwrap();
        let p = Path {
            amplitude: Complex64::new(1.0, 0.0),
            delay: grid.guard_duration,
            doppler: 0.0,
        };
        assert!(matches!(
            PathSet::new(vec![p], grid.guard_duration),
            Err(Error::DelayExceedsGuard { .. })
        ));
        assert!(PathSet::new(vec![], grid.guard_duration).is_err());
    }

    #[test]
    fn no_bds_gives_direct_channels() {
        let cfg = small_config(0);
        let ch = generate_channels(&cfg, 3).unwrap();
        let eff =
            compose_effective_channels(&ch, &PhaseMatrix::all_zero_phase(0, 3), &cfg).unwrap();
        assert_eq!(eff.comm, ch.bs_user);
        assert_eq!(eff.sense, ch.bs_target);
    }

    #[test]
    fn pi_phase_subtracts_cascade() {
        let mut cfg = small_config(1);
        cfg.bds.attenuation = 0.5;
        let ch = generate_channels(&cfg, 9).unwrap();
        let phases = PhaseMatrix::from_rows(&[vec![-1, -1, -1]], 3).unwrap();
        assert!((phases.phase(0, 0) - std::f64::consts::PI).abs() < 1e-15);
        let eff = compose_effective_channels(&ch, &phases, &cfg).unwrap();
        let bd = &ch.bds[0];
        for ((m, n), z) in eff.comm.indexed_iter() {
            let expected = ch.bs_user[[m, n]] - 0.5 * bd.bs_bd[[m, n]] * bd.bd_user[[m, n]];
            assert!((z - expected).norm() < 1e-15 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = small_config(2);
        let ch = generate_channels(&cfg, 1).unwrap();
        let wrong = PhaseMatrix::all_zero_phase(3, 3);
        assert!(matches!(
            compose_effective_channels(&ch, &wrong, &cfg),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn same_seed_same_channels() {
        let cfg = small_config(4);
        assert_eq!(
            generate_channels(&cfg, 17).unwrap(),
            generate_channels(&cfg, 17).unwrap()
        );
        assert_ne!(
            generate_channels(&cfg, 17).unwrap(),
            generate_channels(&cfg, 18).unwrap()
        );
    }

    #[test]
    fn rcs_modes() {
        let mut cfg = small_config(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        cfg.rcs_variance = 1.0;
        assert!((sample_rcs(&cfg, &mut rng).norm_sqr() - 1.0).abs() < 1e-15);
        cfg.rcs_variance = 0.0;
        assert_eq!(sample_rcs(&cfg, &mut rng), Complex64::new(0.0, 0.0));
        cfg.rcs_mode = RcsMode::Sampled;
        assert_eq!(sample_rcs(&cfg, &mut rng), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sampled_rcs_mean_power() {
        let mut cfg = small_config(0);
        cfg.rcs_mode = RcsMode::Sampled;
        cfg.rcs_variance = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_rcs(&cfg, &mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.03 * 2.0, "mean {mean}");
    }

    #[test]
    fn bds_are_placed_within_activity_range() {
        let mut cfg = small_config(30);
        cfg.bds.host = BdHost::Target;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = cfg.entity_positions().target;
        for p in place_bds(&mut rng, &cfg) {
            let d = distance(p, target);
            assert!((0.1 - 1e-12..=0.5 + 1e-12).contains(&d));
        }
    }
}
