//! Cellular test networks: hexagonal clusters of cooperating base stations
//! surrounded by two tiers of interfering cells, with distance path loss,
//! lognormal shadowing, Rayleigh fading and optional sectorized antennas.
//!
//! Interference from the surrounding tiers is treated as worst-case noise
//! (every interferer at full power) and whitened away at each receiver, so the
//! resulting [`PartialCooperationSystem`] has unit noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{cplx, frobenius, identity, psd_inv_sqrt, CMatrix};
use crate::model::PartialCooperationSystem;

/// Cluster sizes with a defined hexagonal arrangement.
pub const SUPPORTED_CLUSTER_SIZES: [usize; 4] = [1, 3, 5, 7];

/// Axial directions of the six neighbours of a hexagonal cell, counter-clockwise
/// from the positive x axis.
const HEX_DIRECTIONS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Shortest user-to-BS distance used by the path-loss law (1 m).
const MIN_DISTANCE_KM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserPlacement {
    /// Uniform over the serving cell's hexagon (and sector).
    Uniform,
    /// At a fixed distance, given as a fraction of the cell radius, with uniform
    /// bearing.
    FixedRadius(f64),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cluster_size: usize,
    pub users_per_cell: usize,
    pub nt: usize,
    pub nr: usize,
    pub streams: usize,
    pub cooperation: usize,
    pub sectors: usize,
    pub cell_radius_km: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub boundary_snr_db: f64,
    pub per_bs_power: f64,
    pub user_placement: UserPlacement,
    /// Boresight of sector 0 in radians; sector `s` points at
    /// `offset + 2πs/S`. Configuration files give it in radians or as a string
    /// such as `"30deg"`.
    #[serde(deserialize_with = "deserialize_angle")]
    pub sector_offset: f64,
    /// Seed of [`realize_seeded`]. Sweeps derive their own per-trial streams.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cluster_size: 3,
            users_per_cell: 1,
            nt: 4,
            nr: 2,
            streams: 2,
            cooperation: 2,
            sectors: 1,
            cell_radius_km: 1.0,
            pathloss_exponent: 3.8,
            shadowing_sigma_db: 8.0,
            boundary_snr_db: 20.0,
            per_bs_power: 1.0,
            user_placement: UserPlacement::Uniform,
            sector_offset: 0.0,
            seed: 0,
        }
    }
}

/// Parses `"30deg"`, `"0.5rad"` or a bare number of radians.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t = text.trim();
    let (num, factor) = if let Some(v) = t.strip_suffix("deg") {
        (v, PI / 180.0)
    } else if let Some(v) = t.strip_suffix("rad") {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    num.trim().parse::<f64>().map(|v| v * factor).map_err(|_| Error::Config(format!("cannot read angle `{text}` (expected e.g. \"30deg\" or radians)")))
}

fn deserialize_angle<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Angle {
        Radians(f64),
        Text(String),
    }
    match Angle::deserialize(de)? {
        Angle::Radians(v) => Ok(v),
        Angle::Text(t) => parse_angle(&t).map_err(serde::de::Error::custom),
    }
}

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.cluster_size * self.users_per_cell
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !SUPPORTED_CLUSTER_SIZES.contains(&self.cluster_size) {
            return bad(format!("cluster_size {} has no hexagonal arrangement; supported values are {:?}", self.cluster_size, SUPPORTED_CLUSTER_SIZES));
        }
        if self.cooperation < 1 || self.cooperation > self.cluster_size {
            return bad(format!("cooperation {} must lie in 1..={} (cluster_size)", self.cooperation, self.cluster_size));
        }
        if ![1, 3, 6].contains(&self.sectors) {
            return bad(format!("sectors must be 1, 3 or 6, got {}", self.sectors));
        }
        if self.nt == 0 || self.nr == 0 || !self.nt.is_multiple_of(self.sectors) {
            return bad(format!("nt = {} must be a positive multiple of sectors = {} and nr = {} positive", self.nt, self.sectors, self.nr));
        }
        if self.users_per_cell == 0 || self.streams == 0 {
            return bad("users_per_cell and streams must be positive".into());
        }
        if !(self.pathloss_exponent > 2.0) {
            return bad(format!("pathloss_exponent must exceed 2, got {}", self.pathloss_exponent));
        }
        if !(self.cell_radius_km > 0.0) || !(self.per_bs_power > 0.0) || !(self.shadowing_sigma_db >= 0.0) {
            return bad("cell_radius_km and per_bs_power must be positive, shadowing_sigma_db non-negative".into());
        }
        if !self.boundary_snr_db.is_finite() || !self.sector_offset.is_finite() {
            return bad("boundary_snr_db and sector_offset must be finite".into());
        }
        if let UserPlacement::FixedRadius(f) = self.user_placement {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("fixed_radius fraction must lie in (0, 1], got {f}"));
            }
        }
        Ok(())
    }

    fn antennas_per_sector(&self) -> usize {
        self.nt / self.sectors
    }

    fn boresight(&self, sector: usize) -> f64 {
        self.sector_offset + 2.0 * PI * sector as f64 / self.sectors as f64
    }
}

/// Positions in km. The first `cluster_size` base stations form the cooperating
/// cluster; the rest are the two interfering tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryRealization {
    pub bs_positions: Vec<[f64; 2]>,
    pub num_cluster: usize,
    pub user_positions: Vec<[f64; 2]>,
    /// Home cell of every user.
    pub user_cell: Vec<usize>,
    /// Sector of the home cell each user was placed in.
    pub user_sector: Vec<usize>,
    /// Boresight of every sector in radians.
    pub sector_orientations: Vec<f64>,
}

/// Channels from every base station (cluster and tiers) to every user.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `gains[k][b]`, `nr × nt`.
    pub gains: Vec<Vec<CMatrix>>,
    pub shadowing_db: Vec<Vec<f64>>,
    /// Unit-variance fading draws behind `gains`.
    pub fading: Vec<Vec<CMatrix>>,
    pub distances_km: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct WhitenedChannels {
    /// `R_k^{-1/2}` per user.
    pub whitening: Vec<CMatrix>,
    /// `R_k^{-1/2}·H̃_{k,m}` for the cluster stations.
    pub channels: Vec<Vec<CMatrix>>,
}

/// A realized network together with its intermediate draws.
#[derive(Debug, Clone)]
pub struct CellularRealization {
    pub geometry: GeometryRealization,
    pub channels: ChannelRealization,
    pub whitened: WhitenedChannels,
    pub system: PartialCooperationSystem,
}

fn axial_to_xy(q: i32, r: i32, spacing: f64) -> [f64; 2] {
    [spacing * (q as f64 + r as f64 / 2.0), spacing * (r as f64 * 3f64.sqrt() / 2.0)]
}

fn hex_distance(a: (i32, i32), b: (i32, i32)) -> i32 {
    let (dq, dr) = (a.0 - b.0, a.1 - b.1);
    (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
}

/// Cluster cells followed by the cells within two hops of the cluster.
fn hex_cells(cluster_size: usize) -> Vec<(i32, i32)> {
    let mut cells = vec![(0, 0)];
    cells.extend(HEX_DIRECTIONS.iter().take(cluster_size - 1));
    let cluster = cells.clone();
    for q in -4..=4 {
        for r in -4..=4 {
            let c = (q, r);
            let dist = cluster.iter().map(|&x| hex_distance(c, x)).min().unwrap();
            if (1..=2).contains(&dist) {
                cells.push(c);
            }
        }
    }
    cells
}

/// Inside a hexagon of circumradius `radius` whose edges face the neighbouring
/// cells.
fn in_hexagon(p: [f64; 2], radius: f64) -> bool {
    let apothem = radius * 3f64.sqrt() / 2.0;
    (0..3).all(|j| {
        let a = j as f64 * PI / 3.0;
        (p[0] * a.cos() + p[1] * a.sin()).abs() <= apothem
    })
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x < -PI {
        x = -PI;
    }
    x
}

/// Sector whose boresight is closest to bearing `bearing`.
fn nearest_sector(cfg: &ScenarioConfig, bearing: f64) -> usize {
    (0..cfg.sectors)
        .min_by(|&a, &b| wrap_angle(bearing - cfg.boresight(a)).abs().total_cmp(&wrap_angle(bearing - cfg.boresight(b)).abs()).then(a.cmp(&b)))
        .unwrap()
}

/// Lays out the cluster and tiers and drops users into their home cells.
/// Users of a cell are assigned to sectors round-robin and placed inside their
/// sector's angular span.
pub fn build_geometry<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<GeometryRealization> {
    cfg.validate()?;
    let spacing = 3f64.sqrt() * cfg.cell_radius_km;
    let bs_positions: Vec<[f64; 2]> = hex_cells(cfg.cluster_size).iter().map(|&(q, r)| axial_to_xy(q, r, spacing)).collect();
    let sector_orientations: Vec<f64> = (0..cfg.sectors).map(|s| cfg.boresight(s)).collect();
    let half_span = PI / cfg.sectors as f64;

    let mut user_positions = Vec::new();
    let mut user_cell = Vec::new();
    let mut user_sector = Vec::new();
    for cell in 0..cfg.cluster_size {
        let origin = bs_positions[cell];
        for u in 0..cfg.users_per_cell {
            let sector = u % cfg.sectors;
            let center = cfg.boresight(sector);
            let offset = match cfg.user_placement {
                UserPlacement::FixedRadius(f) => {
                    let bearing = if cfg.sectors == 1 { rng.random_range(-PI..PI) } else { center + rng.random_range(-half_span..half_span) };
                    let r = f * cfg.cell_radius_km;
                    [r * bearing.cos(), r * bearing.sin()]
                }
                UserPlacement::Uniform => loop {
                    let p = [rng.random_range(-cfg.cell_radius_km..cfg.cell_radius_km), rng.random_range(-cfg.cell_radius_km..cfg.cell_radius_km)];
                    if !in_hexagon(p, cfg.cell_radius_km) {
                        continue;
                    }
                    if cfg.sectors > 1 && wrap_angle(p[1].atan2(p[0]) - center).abs() > half_span {
                        continue;
                    }
                    break p;
                },
            };
            user_positions.push([origin[0] + offset[0], origin[1] + offset[1]]);
            user_cell.push(cell);
            user_sector.push(sector);
        }
    }
    Ok(GeometryRealization { bs_positions, num_cluster: cfg.cluster_size, user_positions, user_cell, user_sector, sector_orientations })
}

/// Sector antenna gain in dB, `−min(12(θ/θ_3dB)², A_s)`; omnidirectional cells
/// have unit gain.
pub fn antenna_gain_db(theta: f64, sectors: usize) -> Result<f64> {
    ensure!((-PI..=PI).contains(&theta), "bearing {theta} outside [-pi, pi]");
    let (floor_db, beamwidth) = match sectors {
        1 => return Ok(0.0),
        3 => (20.0, 70.0 * PI / 180.0),
        6 => (23.0, 35.0 * PI / 180.0),
        s => return Err(Error::Contract(format!("no antenna pattern for {s} sectors"))),
    };
    Ok(-(12.0 * (theta / beamwidth).powi(2)).min(floor_db))
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Draws shadowing (one value per user/BS pair) and fading (one value per
/// antenna pair) and combines them with path loss and antenna gain.
pub fn draw_channels<R: Rng + ?Sized>(cfg: &ScenarioConfig, geom: &GeometryRealization, rng: &mut R) -> Result<ChannelRealization> {
    cfg.validate()?;
    let shadow = Normal::new(0.0, cfg.shadowing_sigma_db).map_err(|e| Error::Config(e.to_string()))?;
    let snr = db_to_linear(cfg.boundary_snr_db);
    let per_sector = cfg.antennas_per_sector();
    let k_users = geom.user_positions.len();
    let mut gains = Vec::with_capacity(k_users);
    let mut shadowing_db = Vec::with_capacity(k_users);
    let mut fading = Vec::with_capacity(k_users);
    let mut distances_km = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let (mut g_row, mut s_row, mut f_row, mut d_row) = (vec![], vec![], vec![], vec![]);
        for (b, &bs) in geom.bs_positions.iter().enumerate() {
            let user = geom.user_positions[k];
            let mut d = distance(user, bs);
            if d < MIN_DISTANCE_KM {
                log::warn!("user {k} is {d:e} km from BS {b}; clamping distance to {MIN_DISTANCE_KM} km");
                d = MIN_DISTANCE_KM;
            }
            let bearing = (user[1] - bs[1]).atan2(user[0] - bs[0]);
            let rho_db = shadow.sample(rng);
            let pathloss = (d / cfg.cell_radius_km).powf(-cfg.pathloss_exponent);
            let mut alpha = CMatrix::zeros(cfg.nr, cfg.nt);
            for z in alpha.iter_mut() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                *z = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            }
            let mut h = alpha.clone();
            for t in 0..cfg.nt {
                let theta = wrap_angle(bearing - cfg.boresight(t / per_sector));
                let amp = (snr * db_to_linear(rho_db) * db_to_linear(antenna_gain_db(theta, cfg.sectors)?) * pathloss).sqrt();
                for r in 0..cfg.nr {
                    h[(r, t)] *= amp;
                }
            }
            g_row.push(h);
            s_row.push(rho_db);
            f_row.push(alpha);
            d_row.push(d);
        }
        gains.push(g_row);
        shadowing_db.push(s_row);
        fading.push(f_row);
        distances_km.push(d_row);
    }
    Ok(ChannelRealization { gains, shadowing_db, fading, distances_km })
}

/// Whitens the worst-case out-of-cluster interference: with every tier station
/// transmitting `P/nt` per antenna, `R_k = I + Σ_tiers (P/nt)·H̃_{k,b}H̃_{k,b}ᴴ`,
/// and cluster channels become `R_k^{-1/2}·H̃_{k,m}`.
pub fn whiten_out_of_cluster(cfg: &ScenarioConfig, geom: &GeometryRealization, chan: &ChannelRealization) -> Result<WhitenedChannels> {
    let scale = cplx(cfg.per_bs_power / cfg.nt as f64, 0.0);
    let mut whitening = Vec::with_capacity(chan.gains.len());
    let mut channels = Vec::with_capacity(chan.gains.len());
    for row in &chan.gains {
        let mut r = identity(cfg.nr);
        for h in &row[geom.num_cluster..] {
            r += h * h.adjoint() * scale;
        }
        let s = psd_inv_sqrt(&crate::linalg::hermitian_part(&r))?;
        channels.push(row[..geom.num_cluster].iter().map(|h| &s * h).collect());
        whitening.push(s);
    }
    Ok(WhitenedChannels { whitening, channels })
}

/// Antennas of BS `b` that serve a user at bearing `bearing` from it.
fn serving_antennas(cfg: &ScenarioConfig, bearing: f64) -> Vec<usize> {
    let s = nearest_sector(cfg, bearing);
    let n = cfg.antennas_per_sector();
    (s * n..(s + 1) * n).collect()
}

/// The `κ` cluster stations with the strongest (whitened) channels to each user,
/// strongest first; ties go to the lower index. `norms[k][m]` is the channel
/// norm from station `m` to user `k`.
pub fn assign_cooperation(cfg: &ScenarioConfig, norms: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    if cfg.cooperation > cfg.cluster_size || cfg.cooperation == 0 {
        return Err(Error::Config(format!("cooperation {} must lie in 1..={}", cfg.cooperation, cfg.cluster_size)));
    }
    Ok(norms
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            order.truncate(cfg.cooperation);
            order
        })
        .collect())
}

/// Draws a complete cooperative network from `rng`.
pub fn realize<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<CellularRealization> {
    let geometry = build_geometry(cfg, rng)?;
    let channels = draw_channels(cfg, &geometry, rng)?;
    let whitened = whiten_out_of_cluster(cfg, &geometry, &channels)?;
    let k_users = geometry.user_positions.len();

    let bearing = |k: usize, m: usize| {
        let (u, b) = (geometry.user_positions[k], geometry.bs_positions[m]);
        (u[1] - b[1]).atan2(u[0] - b[0])
    };
    let norms: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            (0..cfg.cluster_size)
                .map(|m| {
                    let ants = serving_antennas(cfg, bearing(k, m));
                    let h = &whitened.channels[k][m];
                    frobenius(&CMatrix::from_fn(cfg.nr, ants.len(), |r, c| h[(r, ants[c])]))
                })
                .collect()
        })
        .collect();
    let serving_sets = assign_cooperation(cfg, &norms)?;
    let serving_antenna_sets: Vec<Vec<Vec<usize>>> =
        (0..k_users).map(|k| serving_sets[k].iter().map(|&m| serving_antennas(cfg, bearing(k, m))).collect()).collect();
    let streams = (0..k_users)
        .map(|k| {
            let mt: usize = serving_antenna_sets[k].iter().map(Vec::len).sum();
            cfg.streams.min(mt).min(cfg.nr)
        })
        .collect();
    let system = PartialCooperationSystem {
        num_bs: cfg.cluster_size,
        nt: cfg.nt,
        nr: cfg.nr,
        serving_sets,
        serving_antennas: serving_antenna_sets,
        per_bs_power: vec![cfg.per_bs_power; cfg.cluster_size],
        raw_channels: whitened.channels.clone(),
        streams,
    };
    system.validate()?;
    Ok(CellularRealization { geometry, channels, whitened, system })
}

/// Network drawn from a generator seeded with `cfg.seed`.
pub fn realize_seeded(cfg: &ScenarioConfig) -> Result<CellularRealization> {
    realize(cfg, &mut ChaCha20Rng::seed_from_u64(cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert!((parse_angle("30deg").unwrap() - PI / 6.0).abs() < 1e-15);
        assert_eq!(parse_angle(" 0.5 rad").unwrap(), 0.5);
        assert_eq!(parse_angle("1.25").unwrap(), 1.25);
        assert!(parse_angle("north").is_err());
    }

    #[test]
    fn tier_counts() {
        assert_eq!(hex_cells(1).len(), 1 + 18);
        assert_eq!(hex_cells(7).len(), 7 + 12 + 18);
        let cells = hex_cells(3);
        assert!(cells[1..3].iter().all(|&c| hex_distance(c, (0, 0)) == 1 && hex_distance(cells[1], cells[2]) == 1));
    }

    #[test]
    fn antenna_gain_examples() {
        assert_eq!(antenna_gain_db(0.0, 3).unwrap(), 0.0);
        assert!((antenna_gain_db(70.0 * PI / 180.0, 3).unwrap() + 12.0).abs() < 1e-12);
        assert_eq!(antenna_gain_db(PI, 6).unwrap(), -23.0);
        assert_eq!(antenna_gain_db(1.0, 1).unwrap(), 0.0);
        assert!(antenna_gain_db(4.0, 3).is_err());
    }

    #[test]
    fn hexagon_membership() {
        assert!(in_hexagon([0.0, 0.99], 1.0));
        assert!(!in_hexagon([0.9, 0.0], 1.0));
        assert!(in_hexagon([0.86, 0.0], 1.0));
    }

    #[test]
    fn cooperation_ordering() {
        let cfg = ScenarioConfig { cooperation: 2, ..Default::default() };
        assert_eq!(assign_cooperation(&cfg, &[vec![1.0, 3.0, 2.0]]).unwrap(), vec![vec![1, 2]]);
        assert_eq!(assign_cooperation(&cfg, &[vec![2.0, 2.0, 2.0]]).unwrap(), vec![vec![0, 1]]);
    }

    #[test]
    fn rejects_unsupported_cluster() {
        let cfg = ScenarioConfig { cluster_size: 4, ..Default::default() };
        match cfg.validate() {
            Err(Error::Config(msg)) => assert!(msg.contains("[1, 3, 5, 7]")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
