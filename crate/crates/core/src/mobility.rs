//! User movement: a lattice-direction random walk with uniform speeds,
//! specular reflection at the coverage boundary, and Poisson-driven
//! per-slot group sizes.
//!
//! Every user owns a ChaCha8 stream selected by a stable key, so adding a
//! user (or a group) never changes the draws of the others. Group-size
//! variation draws from its own per-group streams.

use std::f64::consts::{FRAC_PI_4, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{Point, ScenarioConfig, UserTrace};

/// Number of lattice directions, `k * pi / 4` for `k = 0..8`.
pub const NUM_DIRECTIONS: usize = 8;

const SIZE_STREAM_TAG: u64 = 1 << 62;
const POOL_STREAM_TAG: u64 = 1 << 61;

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    /// Lower end of the user speed interval, m/s.
    pub speed_min: f64,
    /// Upper end of the user speed interval, m/s.
    pub speed_max: f64,
    /// Mean group size for per-slot resampling; 0 disables it.
    pub lambda: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            speed_min: 0.0,
            speed_max: 0.0,
            lambda: 0.0,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_min >= 0.0 && self.speed_min.is_finite()) {
            return Err(Error::config("speed_min", "must be non-negative"));
        }
        if !(self.speed_max >= self.speed_min && self.speed_max.is_finite()) {
            return Err(Error::config("speed_max", "must be at least speed_min"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be non-negative"));
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.speed_max == 0.0 && self.lambda == 0.0
    }
}

/// Stream key of user `u` in group `g`.
pub fn user_key(group: usize, user: usize) -> u64 {
    ((group as u64) << 32) | user as u64
}

/// Stream key of the `k`-th user of a pooled population that is later split
/// into groups.
pub fn pooled_key(k: usize) -> u64 {
    POOL_STREAM_TAG | k as u64
}

pub fn user_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

pub fn direction(k: usize) -> Point {
    let a = k as f64 * FRAC_PI_4;
    Point::new(a.cos(), a.sin())
}

/// Uniform sample on the disk of radius `radius` around the origin.
pub fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let a = TAU * rng.random::<f64>();
    Point::new(r * a.cos(), r * a.sin())
}

/// Moves `from` by `disp`, reflecting specularly off the circle of radius
/// `radius` as many times as needed.
pub fn reflect_in_disk(from: Point, disp: Point, radius: f64) -> Point {
    let mut p = from;
    let mut d = disp;
    for _ in 0..64 {
        let end = p + d;
        if end.norm() <= radius {
            return end;
        }
        // Smallest s in (0, 1] with |p + s d| = R.
        let a = d.norm_sq();
        let b = 2.0 * p.dot(d);
        let c = p.norm_sq() - radius * radius;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let s = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
        let hit = p + d * s;
        let normal = hit * (1.0 / hit.norm());
        let rest = d * (1.0 - s);
        d = rest - normal * (2.0 * rest.dot(normal));
        p = hit;
    }
    // Only reachable for displacements many diameters long.
    let end = p + d;
    end * (radius / end.norm()).min(1.0)
}

/// One slot of movement: uniform lattice direction, uniform speed.
pub fn step_user<R: Rng + ?Sized>(
    position: Point,
    mobility: &MobilityConfig,
    radius: f64,
    slot_duration: f64,
    rng: &mut R,
) -> Point {
    let k = rng.random_range(0..NUM_DIRECTIONS);
    let speed = rng.random_range(mobility.speed_min..=mobility.speed_max);
    reflect_in_disk(position, direction(k) * (speed * slot_duration), radius)
}

/// One unclamped Poisson draw.
pub fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    Poisson::new(lambda).map_or(0, |d| d.sample(rng) as u64)
}

/// Outcome of one group-size update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeChange {
    pub sizes: Vec<usize>,
    pub arrivals: Vec<usize>,
    pub departures: Vec<usize>,
}

/// Draws a new target size per group from Poisson(lambda), clamped to at
/// least one user. `rngs` holds one stream per group.
pub fn vary_group_sizes<R: Rng>(current: &[usize], lambda: f64, rngs: &mut [R]) -> SizeChange {
    let sizes: Vec<usize> = current
        .iter()
        .zip(rngs.iter_mut())
        .map(|(_, rng)| (poisson_draw(lambda, rng) as usize).max(1))
        .collect();
    SizeChange {
        arrivals: sizes.iter().zip(current).map(|(n, c)| n.saturating_sub(*c)).collect(),
        departures: sizes.iter().zip(current).map(|(n, c)| c.saturating_sub(*n)).collect(),
        sizes,
    }
}

#[derive(Debug, Clone)]
struct MobileUser {
    position: Point,
    rng: ChaCha8Rng,
}

/// The live user population, advanced one slot at a time.
#[derive(Debug, Clone)]
pub struct Population {
    groups: Vec<Vec<MobileUser>>,
    next_user: Vec<usize>,
    size_rngs: Vec<ChaCha8Rng>,
    seed: u64,
}

impl Population {
    /// Users keyed by `(group, index)`, placed uniformly on the disk.
    pub fn new(sizes: &[usize], radius: f64, seed: u64) -> Self {
        let keys = sizes
            .iter()
            .enumerate()
            .map(|(g, &n)| (0..n).map(|u| user_key(g, u)).collect())
            .collect();
        Self::with_keys(keys, radius, seed)
    }

    /// A population of `total` pooled users, split into consecutive blocks
    /// of the given sizes. Regrouping the same pool keeps every position.
    pub fn pooled(sizes: &[usize], radius: f64, seed: u64) -> Self {
        let mut k = 0;
        let keys = sizes
            .iter()
            .map(|&n| {
                let block = (k..k + n).map(pooled_key).collect();
                k += n;
                block
            })
            .collect();
        Self::with_keys(keys, radius, seed)
    }

    fn with_keys(keys: Vec<Vec<u64>>, radius: f64, seed: u64) -> Self {
        let groups: Vec<Vec<MobileUser>> = keys
            .iter()
            .map(|block| {
                block
                    .iter()
                    .map(|&key| {
                        let mut rng = user_rng(seed, key);
                        MobileUser {
                            position: uniform_in_disk(radius, &mut rng),
                            rng,
                        }
                    })
                    .collect()
            })
            .collect();
        Population {
            next_user: keys.iter().map(Vec::len).collect(),
            size_rngs: (0..keys.len())
                .map(|g| user_rng(seed, SIZE_STREAM_TAG | g as u64))
                .collect(),
            groups,
            seed,
        }
    }

    pub fn positions(&self) -> Vec<Vec<Point>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|u| u.position).collect())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn advance(&mut self, mobility: &MobilityConfig, radius: f64, slot_duration: f64) {
        for user in self.groups.iter_mut().flatten() {
            user.position = step_user(user.position, mobility, radius, slot_duration, &mut user.rng);
        }
    }

    /// Resamples group sizes. Arrivals get fresh streams and uniform
    /// positions; departures remove the most recent arrivals first.
    pub fn vary_sizes(&mut self, lambda: f64, radius: f64) -> SizeChange {
        let change = vary_group_sizes(&self.sizes(), lambda, &mut self.size_rngs);
        for (g, group) in self.groups.iter_mut().enumerate() {
            group.truncate(group.len() - change.departures[g]);
            for _ in 0..change.arrivals[g] {
                let mut rng = user_rng(self.seed, user_key(g, self.next_user[g]));
                self.next_user[g] += 1;
                group.push(MobileUser {
                    position: uniform_in_disk(radius, &mut rng),
                    rng,
                });
            }
        }
        change
    }
}

/// Generates the `[slot][group][user]` trace for a scenario.
pub fn generate_trace(cfg: &ScenarioConfig, seed: u64) -> UserTrace {
    simulate(Population::new(&cfg.users_per_group, cfg.coverage_radius, seed), cfg)
}

/// Like [`generate_trace`] but over a pooled population, so that different
/// groupings of the same total see identical user positions.
pub fn generate_pooled_trace(cfg: &ScenarioConfig, seed: u64) -> UserTrace {
    simulate(Population::pooled(&cfg.users_per_group, cfg.coverage_radius, seed), cfg)
}

fn simulate(mut pop: Population, cfg: &ScenarioConfig) -> UserTrace {
    let m = &cfg.mobility;
    let r = cfg.coverage_radius;
    let mut slots = Vec::with_capacity(cfg.num_slots);
    for n in 0..cfg.num_slots {
        if n > 0 {
            pop.advance(m, r, cfg.slot_duration());
        }
        if m.lambda > 0.0 {
            pop.vary_sizes(m.lambda, r);
        }
        slots.push(pop.positions());
    }
    UserTrace { slots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_config;

    #[test]
    fn zero_speed_stays_put() {
        let mut rng = user_rng(1, 0);
        let m = MobilityConfig::default();
        let p = Point::new(3.0, -4.0);
        for _ in 0..100 {
            assert_eq!(step_user(p, &m, 50.0, 2.0, &mut rng), p);
        }
    }

    #[test]
    fn axis_step_displacement() {
        let p = reflect_in_disk(Point::new(0.0, 0.0), direction(0) * (2.0 * 2.0), 50.0);
        assert!((p.x - 4.0).abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn reflection_preserves_path_length_radially() {
        // Straight out along +x from 40 by 20 bounces back to 40.
        let p = reflect_in_disk(Point::new(40.0, 0.0), Point::new(20.0, 0.0), 50.0);
        assert!((p.x - 40.0).abs() < 1e-9 && p.y.abs() < 1e-9);
        // Long displacements still end inside.
        let q = reflect_in_disk(Point::new(10.0, 5.0), Point::new(733.0, -211.0), 50.0);
        assert!(q.norm() <= 50.0 + 1e-9);
    }

    #[test]
    fn trace_is_deterministic_and_nested() {
        let mut cfg = reference_config();
        cfg.mobility.speed_max = 3.0;
        let a = generate_trace(&cfg, 9);
        assert_eq!(a, generate_trace(&cfg, 9));
        cfg.users_per_group = vec![7, 7, 7];
        let b = generate_trace(&cfg, 9);
        for n in 0..cfg.num_slots {
            for g in 0..3 {
                assert_eq!(&b.users(n, g)[..5], a.users(n, g));
            }
        }
    }

    #[test]
    fn zero_speed_trace_is_fixed() {
        let cfg = reference_config();
        assert!(generate_trace(&cfg, 4).is_static());
    }

    #[test]
    fn pooled_regrouping_keeps_positions() {
        let mut cfg = reference_config();
        cfg.users_per_group = vec![4, 4, 4];
        let a = generate_pooled_trace(&cfg, 2);
        cfg.users_per_group = vec![1; 12];
        let b = generate_pooled_trace(&cfg, 2);
        let flat = |t: &UserTrace| t.slot(0).iter().flatten().copied().collect::<Vec<_>>();
        assert_eq!(flat(&a), flat(&b));
    }

    #[test]
    fn tiny_lambda_pins_groups_at_one() {
        let mut cfg = reference_config();
        cfg.mobility.lambda = 1e-9;
        let t = generate_trace(&cfg, 5);
        for n in 0..cfg.num_slots {
            assert_eq!(t.group_sizes(n), vec![1, 1, 1]);
        }
    }

    #[test]
    fn departures_are_lifo() {
        let mut pop = Population::new(&[5], 50.0, 3);
        let before = pop.positions()[0].clone();
        let change = pop.vary_sizes(1e-9, 50.0);
        assert_eq!(change.sizes, vec![1]);
        assert_eq!(change.departures, vec![4]);
        assert_eq!(pop.positions()[0], vec![before[0]]);
        // Regrowing brings in new users behind the survivor.
        let change = pop.vary_sizes(40.0, 50.0);
        assert!(change.arrivals[0] > 0);
        assert_eq!(pop.positions()[0][0], before[0]);
        assert_ne!(pop.positions()[0][1], before[1]);
    }
}
