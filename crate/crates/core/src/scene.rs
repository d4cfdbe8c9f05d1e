//! Indoor geometry, the mobile-user trajectory and per-slot snapshots.
//!
//! The RIS faces the AP, so the incident wave arrives at broadside. User
//! waypoints sit at fixed azimuths around the RIS; the user walks the
//! polyline through them at constant speed and turns around at either end.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, build_channel_from_nlos, ArraySpec, Link, LinkChannel, LinkGeometry};
use crate::error::{Error, Result};

pub type Point = [f64; 3];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Room length, width and height in metres; the room spans `[0, extent]` per axis.
    pub room_m: [f64; 3],
    pub ap_position: Point,
    pub ris_position: Point,
    /// Height of every user waypoint.
    pub user_height_m: f64,
    /// Waypoint azimuths seen from the RIS, strictly increasing.
    pub waypoint_angles_deg: Vec<f64>,
    /// Distance from the RIS shared by all waypoints.
    pub waypoint_radius_m: f64,
    /// Optional per-waypoint override of `waypoint_radius_m`.
    pub waypoint_radii_m: Option<Vec<f64>>,
    pub speed_mps: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            room_m: [63.0, 36.0, 3.0],
            ap_position: [5.9, 18.0, 2.0],
            ris_position: [40.0, 18.0, 2.0],
            user_height_m: 2.0,
            waypoint_angles_deg: vec![-60.0, -50.0, -40.0, -30.0, -20.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            waypoint_radius_m: 12.0,
            waypoint_radii_m: None,
            speed_mps: 1.5,
        }
    }
}

/// Local frame of the RIS: broadside toward the AP, `y` along the rows, `z` up.
#[derive(Debug, Clone, Copy)]
struct RisFrame {
    origin: Point,
    normal: Point,
    across: Point,
}

impl RisFrame {
    fn new(ris: Point, ap: Point) -> Result<Self> {
        let v = [ap[0] - ris[0], ap[1] - ris[1], 0.0];
        let len = norm(v);
        if len == 0.0 {
            return Err(Error::config("AP must not sit directly above or below the RIS"));
        }
        let normal = [v[0] / len, v[1] / len, 0.0];
        let across = [-normal[1], normal[0], 0.0];
        Ok(Self {
            origin: ris,
            normal,
            across,
        })
    }

    /// Elevation and azimuth of `p` seen from the RIS.
    fn angles(&self, p: Point) -> (f64, f64) {
        let v = sub(p, self.origin);
        let r = norm(v);
        let elevation = (v[2] / r).clamp(-1.0, 1.0).asin();
        let mut azimuth = dot(v, self.across).atan2(dot(v, self.normal));
        if azimuth <= -std::f64::consts::PI {
            azimuth += 2.0 * std::f64::consts::PI;
        }
        (elevation, azimuth)
    }

    fn point_at(&self, azimuth: f64, radius: f64, height: f64) -> Point {
        let (s, c) = azimuth.sin_cos();
        [
            self.origin[0] + radius * (c * self.normal[0] + s * self.across[0]),
            self.origin[1] + radius * (c * self.normal[1] + s * self.across[1]),
            height,
        ]
    }
}

impl SceneConfig {
    fn frame(&self) -> Result<RisFrame> {
        RisFrame::new(self.ris_position, self.ap_position)
    }

    fn inside(&self, p: Point) -> bool {
        p.iter()
            .zip(&self.room_m)
            .all(|(&x, &extent)| (0.0..=extent).contains(&x))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps > 0.0) {
            return Err(Error::config(format!(
                "user speed must be positive, got {}",
                self.speed_mps
            )));
        }
        if self.waypoint_angles_deg.is_empty() {
            return Err(Error::config("at least one waypoint is required"));
        }
        if self.waypoint_angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("waypoint angles must be strictly increasing"));
        }
        if let Some(radii) = &self.waypoint_radii_m {
            if radii.len() != self.waypoint_angles_deg.len() {
                return Err(Error::config("waypoint_radii_m must list one radius per waypoint"));
            }
        }
        for (name, p) in [("AP", self.ap_position), ("RIS", self.ris_position)] {
            if !self.inside(p) {
                return Err(Error::config(format!("{name} position {p:?} outside the room")));
            }
        }
        for (angle, p) in self.waypoint_angles_deg.iter().zip(self.waypoints()?) {
            if !self.inside(p) {
                return Err(Error::config(format!("waypoint at {angle}° ({p:?}) outside the room")));
            }
            if distance(p, self.ris_position) == 0.0 || distance(p, self.ap_position) == 0.0 {
                return Err(Error::config(format!("waypoint at {angle}° coincides with a node")));
            }
        }
        Ok(())
    }

    fn radius(&self, index: usize) -> f64 {
        self.waypoint_radii_m
            .as_ref()
            .map_or(self.waypoint_radius_m, |r| r[index])
    }

    /// Waypoint positions in angle order.
    pub fn waypoints(&self) -> Result<Vec<Point>> {
        let frame = self.frame()?;
        Ok(self
            .waypoint_angles_deg
            .iter()
            .enumerate()
            .map(|(i, a)| frame.point_at(a.to_radians(), self.radius(i), self.user_height_m))
            .collect())
    }

    /// Length of `room_m`'s diagonal, used to normalise distances.
    pub fn room_diagonal(&self) -> f64 {
        norm(self.room_m)
    }
}

/// User positions for every slot of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Point>,
    /// Angle of the nearest waypoint, per slot.
    pub labels_deg: Vec<f64>,
    /// Index of the one-way pass each slot belongs to.
    pub pass: Vec<usize>,
    /// Distance walked per slot.
    pub step_length: f64,
    waypoints: Vec<Point>,
    angles_deg: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn waypoint_angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    /// Slots at which the user arrives at a waypoint, as `(slot, waypoint index)`.
    ///
    /// Within each one-way pass the arrival is the slot closest to the
    /// waypoint, counted only when it lies within one step of it. A
    /// stationary user is at its waypoint in every slot.
    pub fn arrivals(&self) -> Vec<(usize, usize)> {
        if self.waypoints.len() == 1 || self.step_length == 0.0 {
            let nearest = self.nearest_waypoint(0);
            return (0..self.len()).map(|i| (i, nearest)).collect();
        }
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.len() {
            let pass = self.pass[start];
            let end = (start..self.len())
                .find(|&i| self.pass[i] != pass)
                .unwrap_or(self.len());
            for (w, &wp) in self.waypoints.iter().enumerate() {
                let best = (start..end)
                    .map(|i| (i, distance(self.positions[i], wp)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((slot, d)) = best {
                    if d <= self.step_length + 1e-9 {
                        out.push((slot, w));
                    }
                }
            }
            start = end;
        }
        out.sort_unstable();
        out
    }

    fn nearest_waypoint(&self, slot: usize) -> usize {
        let p = self.positions[slot];
        self.waypoints
            .iter()
            .enumerate()
            .min_by(|a, b| distance(p, *a.1).total_cmp(&distance(p, *b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Walks the waypoint polyline back and forth at `speed_mps` for `steps` slots.
pub fn build_trajectory(cfg: &SceneConfig, slot_duration: f64, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::config("episode must contain at least one slot"));
    }
    if !(slot_duration > 0.0) {
        return Err(Error::config("slot duration must be positive"));
    }
    cfg.validate()?;
    let waypoints = cfg.waypoints()?;
    let seg_len: Vec<f64> = waypoints.windows(2).map(|w| distance(w[0], w[1])).collect();
    let total: f64 = seg_len.iter().sum();
    let step = cfg.speed_mps * slot_duration;

    let point_at = |arc: f64| -> Point {
        let mut remaining = arc;
        for (i, &len) in seg_len.iter().enumerate() {
            if remaining <= len || i + 1 == seg_len.len() {
                let t = if len > 0.0 {
                    (remaining / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                return lerp(waypoints[i], waypoints[i + 1], t);
            }
            remaining -= len;
        }
        waypoints[0]
    };

    let mut positions = Vec::with_capacity(steps);
    let mut pass = Vec::with_capacity(steps);
    for i in 0..steps {
        if total == 0.0 {
            positions.push(waypoints[0]);
            pass.push(0);
            continue;
        }
        let s = i as f64 * step;
        let k = (s / total).floor();
        let within = s - k * total;
        let arc = if (k as u64).is_multiple_of(2) {
            within
        } else {
            total - within
        };
        positions.push(point_at(arc));
        pass.push(k as usize);
    }

    let mut traj = Trajectory {
        labels_deg: Vec::new(),
        positions,
        pass,
        step_length: if total == 0.0 { 0.0 } else { step },
        waypoints,
        angles_deg: cfg.waypoint_angles_deg.clone(),
    };
    traj.labels_deg = (0..steps).map(|i| traj.angles_deg[traj.nearest_waypoint(i)]).collect();
    Ok(traj)
}

/// Rician and NLoS settings of the three links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub k_ap_user: f64,
    pub k_ap_ris: f64,
    pub k_ris_user: f64,
    /// NLoS power of the RIS-side links before path-gain scaling.
    pub nlos_power: f64,
    /// NLoS power of the blocked direct AP-user link before path-gain
    /// scaling. The default sits 40 dB below `nlos_power` so the reflected
    /// path carries most of the received power.
    pub nlos_power_ap_user: f64,
    /// Gauss–Markov coefficient between consecutive NLoS draws; 0 gives i.i.d.
    /// slots and 1 freezes the first draw.
    pub correlation: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            k_ap_user: 0.0,
            k_ap_ris: 20.0,
            k_ris_user: 20.0,
            nlos_power: 1.0,
            nlos_power_ap_user: 1e-4,
            correlation: 0.0,
        }
    }
}

/// Channels of the three links in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub ap_user: LinkChannel,
    pub ap_ris: LinkChannel,
    pub ris_user: LinkChannel,
}

/// Geometry of the three links in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotGeometry {
    pub user: Point,
    pub ap_user: LinkGeometry,
    pub ap_ris: LinkGeometry,
    pub ris_user: LinkGeometry,
}

/// Everything known about one slot: true channels plus the previous slot's
/// channels and geometry (the outdated CSI available to a learner).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub slot: usize,
    pub waypoint_deg: f64,
    pub geometry: SlotGeometry,
    pub current: LinkSet,
    pub previous_geometry: SlotGeometry,
    pub previous: LinkSet,
}

struct NlosState {
    ap_user: Vec<num_complex::Complex64>,
    ap_ris: Vec<num_complex::Complex64>,
    ris_user: Vec<num_complex::Complex64>,
}

/// Sequential snapshot generator for one episode.
pub struct SnapshotStream {
    scene: SceneConfig,
    trajectory: Trajectory,
    spec: ArraySpec,
    fading: FadingParams,
    frame: RisFrame,
    rng: ChaCha8Rng,
    nlos: Option<NlosState>,
    last: Option<(usize, SlotGeometry, LinkSet)>,
}

impl SnapshotStream {
    /// Channel draws are seeded from `seed` alone, independent of any controller.
    pub fn new(
        scene: &SceneConfig,
        trajectory: Trajectory,
        spec: ArraySpec,
        fading: FadingParams,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if !(0.0..=1.0).contains(&fading.correlation) {
            return Err(Error::config("fading correlation must lie in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(Self {
            frame: scene.frame()?,
            scene: scene.clone(),
            trajectory,
            spec,
            fading,
            rng,
            nlos: None,
            last: None,
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn spec(&self) -> &ArraySpec {
        &self.spec
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    fn geometry(&self, slot: usize) -> Result<SlotGeometry> {
        let user = self.trajectory.positions[slot];
        let ap = self.scene.ap_position;
        let (el_ar, az_ar) = self.frame.angles(ap);
        let (el_ru, az_ru) = self.frame.angles(user);
        Ok(SlotGeometry {
            user,
            ap_user: LinkGeometry::new(Link::ApUser, distance(ap, user), 0.0, 0.0)?,
            ap_ris: LinkGeometry::new(Link::ApRis, distance(ap, self.scene.ris_position), el_ar, az_ar)?,
            ris_user: LinkGeometry::new(Link::RisUser, distance(user, self.scene.ris_position), el_ru, az_ru)?,
        })
    }

    fn draw_nlos(&mut self) -> Result<NlosState> {
        let n = self.spec.len();
        let f = self.fading;
        let fresh = NlosState {
            ap_user: channel::sample_nlos(1, f.nlos_power_ap_user, &mut self.rng)?,
            ap_ris: channel::sample_nlos(n, f.nlos_power, &mut self.rng)?,
            ris_user: channel::sample_nlos(n, f.nlos_power, &mut self.rng)?,
        };
        let rho = f.correlation;
        Ok(match self.nlos.take() {
            Some(prev) if rho > 0.0 => {
                let innov = (1.0 - rho * rho).sqrt();
                let mix = |old: Vec<_>, new: Vec<_>| -> Vec<num_complex::Complex64> {
                    old.into_iter().zip(new).map(|(o, w)| o * rho + w * innov).collect()
                };
                NlosState {
                    ap_user: mix(prev.ap_user, fresh.ap_user),
                    ap_ris: mix(prev.ap_ris, fresh.ap_ris),
                    ris_user: mix(prev.ris_user, fresh.ris_user),
                }
            }
            _ => fresh,
        })
    }

    /// Builds slot `slot`. Slots are meant to be requested in order; the
    /// previous-slot fields come from the cached slot `slot - 1` and fall
    /// back to the current slot at `slot = 0` or after a jump.
    pub fn snapshot_at(&mut self, slot: usize) -> Result<Snapshot> {
        if slot >= self.len() {
            return Err(Error::domain(format!(
                "slot {slot} out of range for an episode of {} slots",
                self.len()
            )));
        }
        let geometry = self.geometry(slot)?;
        let nlos = self.draw_nlos()?;
        let f = self.fading;
        let current = LinkSet {
            ap_user: build_channel_from_nlos(&geometry.ap_user, &self.spec, f.k_ap_user, nlos.ap_user.clone())?,
            ap_ris: build_channel_from_nlos(&geometry.ap_ris, &self.spec, f.k_ap_ris, nlos.ap_ris.clone())?,
            ris_user: build_channel_from_nlos(&geometry.ris_user, &self.spec, f.k_ris_user, nlos.ris_user.clone())?,
        };
        self.nlos = Some(nlos);

        let (previous_geometry, previous) = match self.last.take() {
            Some((i, g, links)) if slot > 0 && i + 1 == slot => (g, links),
            _ => (geometry, current.clone()),
        };
        self.last = Some((slot, geometry, current.clone()));
        Ok(Snapshot {
            slot,
            waypoint_deg: self.trajectory.labels_deg[slot],
            geometry,
            current,
            previous_geometry,
            previous,
        })
    }
}
