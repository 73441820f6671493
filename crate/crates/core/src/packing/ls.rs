//! Lubachevsky-Stillinger growth of equal discs in a periodic box.
//!
//! Discs start as points with random thermal velocities and their common
//! diameter grows linearly in time, `σ(t) = g·t`. Dynamics are event driven:
//! each disc keeps exactly one pending event (next collision or next cell
//! crossing) in a min-heap, and stale events are discarded lazily by comparing
//! per-disc trajectory counters. Collisions reflect the normal relative
//! velocity in the frame of the growing surfaces, so pairs always separate
//! faster than they grow. Velocities are rescaled to unit temperature every
//! `n` collisions to cancel the energy injected by growth.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_geometry, target_count, wrap, GeneratorTag, Point, PufMask, LS_MAX_FRACTION};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy)]
pub struct LsOptions {
    /// Diameter growth per unit time; velocities have unit variance per axis.
    pub growth_rate: f64,
    /// Collision events between two stall checks.
    pub stall_window: u64,
    /// Minimum packing-fraction gain expected over one stall window.
    pub stall_min_gain: f64,
    /// Upper bound accepted for the target fraction.
    pub max_fraction: f64,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            growth_rate: 0.05,
            stall_window: 100_000,
            stall_min_gain: 1e-6,
            max_fraction: LS_MAX_FRACTION,
        }
    }
}

/// Grows `round(fp·L²/πr²)` discs until their radius reaches `radius_nm`.
pub fn generate_ls(side_um: f64, radius_nm: f64, fp: f64, seed: u64) -> Result<PufMask> {
    generate_ls_with(side_um, radius_nm, fp, seed, LsOptions::default())
}

pub fn generate_ls_with(side_um: f64, radius_nm: f64, fp: f64, seed: u64, opts: LsOptions) -> Result<PufMask> {
    check_geometry(side_um, radius_nm, fp)?;
    if fp > opts.max_fraction {
        return Err(Error::InvalidParameter(format!(
            "LS packing fraction {fp} exceeds {}",
            opts.max_fraction
        )));
    }
    if !(opts.growth_rate > 0.0) {
        return Err(Error::InvalidParameter("LS growth rate must be positive".into()));
    }
    let n = target_count(side_um, radius_nm, fp);
    let mut sim = Simulation::new(side_um, radius_nm * 1e-3, n, seed, opts);
    sim.run(fp)?;
    Ok(PufMask {
        side_um,
        radius_nm,
        centers: sim.into_centers(),
        periodic: true,
        seed,
        tag: GeneratorTag::Ls,
    })
}

#[derive(Clone, Copy)]
enum Kind {
    Collision { partner: u32, partner_count: u64 },
    Cross { dx: i8, dy: i8 },
}

#[derive(Clone, Copy)]
struct Event {
    time: f64,
    disc: u32,
    count: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.disc.cmp(&self.disc))
            .then_with(|| other.count.cmp(&self.count))
    }
}

#[derive(Clone, Copy)]
struct Disc {
    pos: Point,
    vel: (f64, f64),
    /// Time at which `pos` is valid.
    t: f64,
    cell: (usize, usize),
    count: u64,
}

struct Simulation {
    side: f64,
    target_diameter: f64,
    growth: f64,
    ncell: usize,
    width: f64,
    discs: Vec<Disc>,
    buckets: Vec<Vec<u32>>,
    heap: BinaryHeap<Event>,
    opts: LsOptions,
}

impl Simulation {
    fn new(side: f64, radius: f64, n: usize, seed: u64, opts: LsOptions) -> Self {
        let target_diameter = 2.0 * radius;
        let ncell = ((side / target_diameter).floor() as usize).max(1);
        let width = side / ncell as f64;
        let mut discs = Vec::with_capacity(n);
        let mut buckets = vec![Vec::new(); ncell * ncell];
        for i in 0..n {
            let mut rng = stream(seed, domain::LS_INIT, i as u64);
            let pos = Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side);
            let vel: (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let cell = (
                ((pos.x / width) as usize).min(ncell - 1),
                ((pos.y / width) as usize).min(ncell - 1),
            );
            buckets[cell.1 * ncell + cell.0].push(i as u32);
            discs.push(Disc {
                pos,
                vel,
                t: 0.0,
                cell,
                count: 0,
            });
        }
        let mut sim = Self {
            side,
            target_diameter,
            growth: opts.growth_rate,
            ncell,
            width,
            discs,
            buckets,
            heap: BinaryHeap::new(),
            opts,
        };
        sim.remove_drift_and_normalize();
        sim
    }

    fn fraction_at(&self, t: f64) -> f64 {
        let r = 0.5 * self.growth * t;
        self.discs.len() as f64 * std::f64::consts::PI * r * r / (self.side * self.side)
    }

    fn run(&mut self, target_fp: f64) -> Result<()> {
        let n = self.discs.len();
        if n < 2 {
            return Ok(());
        }
        let t_end = self.target_diameter / self.growth;
        for i in 0..n {
            self.schedule(i, 0.0);
        }

        let mut collisions = 0u64;
        let mut mark_fp = 0.0;
        let rescale_every = n as u64;
        while let Some(ev) = self.heap.pop() {
            if ev.time >= t_end {
                break;
            }
            let i = ev.disc as usize;
            if self.discs[i].count != ev.count {
                continue;
            }
            match ev.kind {
                Kind::Cross { dx, dy } => {
                    self.advance(i, ev.time);
                    self.move_cell(i, dx, dy);
                    self.schedule(i, ev.time);
                }
                Kind::Collision { partner, partner_count } => {
                    let j = partner as usize;
                    if self.discs[j].count != partner_count {
                        self.advance(i, ev.time);
                        self.schedule(i, ev.time);
                        continue;
                    }
                    self.advance(i, ev.time);
                    self.advance(j, ev.time);
                    self.collide(i, j);
                    self.schedule(i, ev.time);
                    self.schedule(j, ev.time);

                    collisions += 1;
                    if collisions % self.opts.stall_window == 0 {
                        let fp_now = self.fraction_at(ev.time);
                        if fp_now - mark_fp < self.opts.stall_min_gain {
                            return Err(Error::GrowthStalled {
                                reached: fp_now,
                                target: target_fp,
                            });
                        }
                        mark_fp = fp_now;
                    }
                    if collisions % rescale_every == 0 {
                        self.rescale(ev.time);
                    }
                }
            }
        }
        for i in 0..n {
            self.advance(i, t_end);
        }
        Ok(())
    }

    fn into_centers(self) -> Vec<Point> {
        let side = self.side;
        self.discs
            .into_iter()
            .map(|d| Point::new(wrap(d.pos.x, side), wrap(d.pos.y, side)))
            .collect()
    }

    fn advance(&mut self, i: usize, t: f64) {
        let d = &mut self.discs[i];
        let dt = t - d.t;
        d.pos.x += d.vel.0 * dt;
        d.pos.y += d.vel.1 * dt;
        d.t = t;
    }

    fn min_image(&self, v: f64) -> f64 {
        v - self.side * (v / self.side).round()
    }

    fn collide(&mut self, i: usize, j: usize) {
        let (a, b) = (self.discs[i], self.discs[j]);
        let dx = self.min_image(b.pos.x - a.pos.x);
        let dy = self.min_image(b.pos.y - a.pos.y);
        let dist = (dx * dx + dy * dy).sqrt();
        if dist == 0.0 {
            return;
        }
        let (nx, ny) = (dx / dist, dy / dist);
        let u = (b.vel.0 - a.vel.0) * nx + (b.vel.1 - a.vel.1) * ny;
        let kick = self.growth - u;
        self.discs[i].vel.0 -= kick * nx;
        self.discs[i].vel.1 -= kick * ny;
        self.discs[j].vel.0 += kick * nx;
        self.discs[j].vel.1 += kick * ny;
        self.discs[i].count += 1;
        self.discs[j].count += 1;
    }

    fn move_cell(&mut self, i: usize, dx: i8, dy: i8) {
        let n = self.ncell as isize;
        let (cx, cy) = self.discs[i].cell;
        let old = cy * self.ncell + cx;
        if let Some(k) = self.buckets[old].iter().position(|&v| v as usize == i) {
            self.buckets[old].swap_remove(k);
        }
        let mut nx = cx as isize + dx as isize;
        let mut ny = cy as isize + dy as isize;
        let d = &mut self.discs[i];
        if nx < 0 {
            nx += n;
            d.pos.x += self.side;
        } else if nx >= n {
            nx -= n;
            d.pos.x -= self.side;
        }
        if ny < 0 {
            ny += n;
            d.pos.y += self.side;
        } else if ny >= n {
            ny -= n;
            d.pos.y -= self.side;
        }
        d.cell = (nx as usize, ny as usize);
        self.buckets[ny as usize * self.ncell + nx as usize].push(i as u32);
    }

    /// Computes and pushes the next event of disc `i`, which must be synced to `now`.
    fn schedule(&mut self, i: usize, now: f64) {
        let d = self.discs[i];
        debug_assert!(d.t == now);

        // next cell crossing
        let (cx, cy) = d.cell;
        let exit = |p: f64, v: f64, c: usize| -> (f64, i8) {
            let lo = c as f64 * self.width;
            if v > 0.0 {
                (((lo + self.width - p) / v).max(0.0), 1)
            } else if v < 0.0 {
                (((lo - p) / v).max(0.0), -1)
            } else {
                (f64::INFINITY, 0)
            }
        };
        let (tx, sx) = exit(d.pos.x, d.vel.0, cx);
        let (ty, sy) = exit(d.pos.y, d.vel.1, cy);
        let mut best = if tx <= ty {
            Event {
                time: now + tx,
                disc: i as u32,
                count: d.count,
                kind: Kind::Cross { dx: sx, dy: 0 },
            }
        } else {
            Event {
                time: now + ty,
                disc: i as u32,
                count: d.count,
                kind: Kind::Cross { dx: 0, dy: sy },
            }
        };

        let sigma = self.growth * now;
        let g = self.growth;
        let n = self.ncell as isize;
        let mut seen = [usize::MAX; 9];
        let mut k = 0;
        for oy in -1..=1isize {
            for ox in -1..=1isize {
                let cell = ((cy as isize + oy).rem_euclid(n) * n + (cx as isize + ox).rem_euclid(n)) as usize;
                if seen[..k].contains(&cell) {
                    continue;
                }
                seen[k] = cell;
                k += 1;
                for &j in &self.buckets[cell] {
                    let j = j as usize;
                    if j == i {
                        continue;
                    }
                    let o = &self.discs[j];
                    let dt = now - o.t;
                    let rx = self.min_image(o.pos.x + o.vel.0 * dt - d.pos.x);
                    let ry = self.min_image(o.pos.y + o.vel.1 * dt - d.pos.y);
                    let vx = o.vel.0 - d.vel.0;
                    let vy = o.vel.1 - d.vel.1;
                    if let Some(tau) = contact_time(rx, ry, vx, vy, sigma, g) {
                        let t = now + tau;
                        if t < best.time {
                            best = Event {
                                time: t,
                                disc: i as u32,
                                count: d.count,
                                kind: Kind::Collision {
                                    partner: j as u32,
                                    partner_count: o.count,
                                },
                            };
                        }
                    }
                }
            }
        }
        self.heap.push(best);
    }

    fn remove_drift_and_normalize(&mut self) {
        let n = self.discs.len().max(1) as f64;
        let (mx, my) = self
            .discs
            .iter()
            .fold((0.0, 0.0), |(a, b), d| (a + d.vel.0, b + d.vel.1));
        let (mx, my) = (mx / n, my / n);
        for d in &mut self.discs {
            d.vel.0 -= mx;
            d.vel.1 -= my;
        }
        let ms = self
            .discs
            .iter()
            .map(|d| d.vel.0 * d.vel.0 + d.vel.1 * d.vel.1)
            .sum::<f64>()
            / (2.0 * n);
        if ms > 0.0 {
            let s = 1.0 / ms.sqrt();
            for d in &mut self.discs {
                d.vel.0 *= s;
                d.vel.1 *= s;
            }
        }
    }

    fn rescale(&mut self, now: f64) {
        for i in 0..self.discs.len() {
            self.advance(i, now);
        }
        self.remove_drift_and_normalize();
        for d in &mut self.discs {
            d.count += 1;
        }
        self.heap.clear();
        for i in 0..self.discs.len() {
            self.schedule(i, now);
        }
    }
}

/// Time until two discs with relative position `r`, relative velocity `v`
/// and common diameter `sigma` growing at rate `g` come into contact.
fn contact_time(rx: f64, ry: f64, vx: f64, vy: f64, sigma: f64, g: f64) -> Option<f64> {
    let a = vx * vx + vy * vy - g * g;
    let b = rx * vx + ry * vy - sigma * g;
    let c = rx * rx + ry * ry - sigma * sigma;
    if c <= 1e-15 * sigma * sigma {
        // touching (or round-off overlap): collide now if closing, else wait
        // for growth to catch up
        return if b < 0.0 {
            Some(0.0)
        } else if a < 0.0 {
            Some(-2.0 * b / a)
        } else {
            None
        };
    }
    if a >= 0.0 && b >= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    Some(c / (-b + disc.sqrt()))
}
