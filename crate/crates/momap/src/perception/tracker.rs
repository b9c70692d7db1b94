//! Multi-object tracking: gated cost matrix over ego-compensated
//! world-frame observations, Hungarian association, and the
//! tentative/confirmed/lost track lifecycle.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::hungarian::{solve_assignment, CostMatrix, FORBIDDEN};
use super::observation::ObjectObservation;
use crate::geom::{cosine, iou3d_padded, normalize_in_place, Aabb};

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track update at t={t} is not after the last update at t={last}")]
    NonMonotonicTime { t: f64, last: f64 },
    #[error("assignment failed: {0}")]
    Assignment(#[from] super::hungarian::AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackState {
    Tentative,
    Confirmed,
    Lost,
}

#[derive(Debug, Clone)]
pub struct TrackedObject {
    pub track_id: u64,
    pub label: String,
    /// Running-mean descriptor, renormalized.
    pub embedding: Vec<f64>,
    embedding_sum: Vec<f64>,
    embedding_count: usize,
    pub aabb_world: Aabb,
    /// Time-stamped centroids, strictly increasing in t.
    pub tracklet: Vec<(f64, Vector3<f64>)>,
    pub state: TrackState,
    pub hits: u32,
    pub misses: u32,
    pub last_seen: f64,
    /// Majority ground-truth id over matched observations (evaluation only).
    pub true_id: Option<u32>,
    pub interactive_state: Option<bool>,
}

impl TrackedObject {
    fn new(id: u64, obs: &ObjectObservation, t: f64) -> Self {
        Self {
            track_id: id,
            label: obs.label.clone(),
            embedding: obs.embedding.clone(),
            embedding_sum: obs.embedding.clone(),
            embedding_count: 1,
            aabb_world: obs.aabb_world,
            tracklet: vec![(t, obs.centroid)],
            state: TrackState::Tentative,
            hits: 1,
            misses: 0,
            last_seen: t,
            true_id: obs.true_id,
            interactive_state: None,
        }
    }

    fn absorb(&mut self, obs: &ObjectObservation, t: f64, confirm_hits: u32) {
        for (s, o) in self.embedding_sum.iter_mut().zip(&obs.embedding) {
            *s += o;
        }
        self.embedding_count += 1;
        self.embedding = self
            .embedding_sum
            .iter()
            .map(|v| v / self.embedding_count as f64)
            .collect();
        normalize_in_place(&mut self.embedding);
        if !obs.label.is_empty() {
            self.label = obs.label.clone();
        }
        self.aabb_world = obs.aabb_world;
        self.tracklet.push((t, obs.centroid));
        self.hits += 1;
        self.misses = 0;
        self.last_seen = t;
        if obs.true_id.is_some() {
            self.true_id = obs.true_id;
        }
        if self.state == TrackState::Tentative && self.hits >= confirm_hits {
            self.state = TrackState::Confirmed;
        }
    }

    /// Constant-velocity estimate from the last two tracklet entries.
    pub fn velocity(&self) -> Vector3<f64> {
        if self.tracklet.len() < 2 {
            return Vector3::zeros();
        }
        let (t1, p1) = self.tracklet[self.tracklet.len() - 2];
        let (t2, p2) = self.tracklet[self.tracklet.len() - 1];
        if t2 <= t1 {
            return Vector3::zeros();
        }
        (p2 - p1) / (t2 - t1)
    }

    /// Last box advanced along the tracklet velocity to time `t`.
    pub fn predicted_aabb(&self, t: f64) -> Aabb {
        let dt = t - self.last_seen;
        self.aabb_world.translated(&(self.velocity() * dt))
    }

    pub fn predicted_centroid(&self, t: f64) -> Vector3<f64> {
        let (_, last) = *self.tracklet.last().expect("tracklet never empty");
        last + self.velocity() * (t - self.last_seen)
    }

    /// Centroid displacement over the trailing `window` seconds.
    pub fn displacement_over(&self, window: f64) -> f64 {
        let Some(&(t_end, p_end)) = self.tracklet.last() else {
            return 0.0;
        };
        let t_start = t_end - window;
        let earliest = self
            .tracklet
            .iter()
            .rev()
            .take_while(|(t, _)| *t >= t_start)
            .last();
        match earliest {
            Some(&(_, p_start)) => (p_end - p_start).norm(),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackParams {
    pub weight_iou: f64,
    pub weight_distance: f64,
    pub weight_embedding: f64,
    /// Distance normalization cap, meters.
    pub max_distance: f64,
    /// Costs above this are forbidden.
    pub cost_gate: f64,
    pub confirm_hits: u32,
    pub lost_after_misses: u32,
    pub aabb_pad: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            weight_iou: 0.5,
            weight_distance: 0.3,
            weight_embedding: 0.2,
            max_distance: 2.0,
            cost_gate: 0.9,
            confirm_hits: 3,
            lost_after_misses: 5,
            aabb_pad: 0.02,
        }
    }
}

/// All tracks of one run; ids are never reused.
#[derive(Debug, Clone, Default)]
pub struct TrackSet {
    pub tracks: Vec<TrackedObject>,
    next_id: u64,
    last_t: Option<f64>,
}

/// Which observation matched which track during one update.
#[derive(Debug, Clone, Default)]
pub struct MatchReport {
    /// (track_id, observation index) pairs.
    pub matches: Vec<(u64, usize)>,
    pub spawned: Vec<u64>,
    pub lost: Vec<u64>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &TrackedObject> {
        self.tracks.iter().filter(|t| t.state == TrackState::Confirmed)
    }

    pub fn get(&self, id: u64) -> Option<&TrackedObject> {
        self.tracks.iter().find(|t| t.track_id == id)
    }
}

fn association_cost(
    track: &TrackedObject,
    obs: &ObjectObservation,
    t: f64,
    params: &TrackParams,
) -> f64 {
    let iou = iou3d_padded(&track.predicted_aabb(t), &obs.aabb_world, params.aabb_pad);
    let dist = (track.predicted_centroid(t) - obs.centroid).norm();
    let dist_term = (dist / params.max_distance).min(1.0);
    let emb_term = (1.0 - cosine(&track.embedding, &obs.embedding)) / 2.0;
    params.weight_iou * (1.0 - iou)
        + params.weight_distance * dist_term
        + params.weight_embedding * emb_term
}

/// One tracking step: associate `observations` (already ego-compensated
/// into the world frame) with live tracks at time `t`.
pub fn track_objects(
    tracks: &mut TrackSet,
    observations: &[ObjectObservation],
    t: f64,
    params: &TrackParams,
) -> Result<MatchReport, TrackError> {
    if let Some(last) = tracks.last_t {
        if t <= last {
            return Err(TrackError::NonMonotonicTime { t, last });
        }
    }
    tracks.last_t = Some(t);

    let live: Vec<usize> = tracks
        .tracks
        .iter()
        .enumerate()
        .filter(|(_, tr)| tr.state != TrackState::Lost)
        .map(|(i, _)| i)
        .collect();
    let n_tracks = live.len();
    let n_obs = observations.len();
    let mut report = MatchReport::default();

    // Augmented square matrix: real block gated at the cost gate, dummy
    // diagonal entries let any track or observation stay unmatched at
    // gate/2 each, so a pair is matched exactly when its cost <= gate.
    let side = n_tracks + n_obs;
    let mut matched_obs = vec![false; n_obs];
    let mut matched_tracks = vec![false; n_tracks];
    if side > 0 && n_tracks > 0 && n_obs > 0 {
        let dummy = params.cost_gate / 2.0;
        let mut data = vec![0.0f64; side * side];
        for (ri, &ti) in live.iter().enumerate() {
            for oi in 0..n_obs {
                let cost = association_cost(&tracks.tracks[ti], &observations[oi], t, params);
                data[ri * side + oi] = if cost > params.cost_gate { FORBIDDEN } else { cost };
            }
            for oi in n_obs..side {
                data[ri * side + oi] =
                    if oi - n_obs == ri { dummy } else { FORBIDDEN };
            }
        }
        for ri in n_tracks..side {
            for oi in 0..side {
                data[ri * side + oi] = if oi < n_obs {
                    if ri - n_tracks == oi {
                        dummy
                    } else {
                        FORBIDDEN
                    }
                } else {
                    0.0
                };
            }
        }
        let matrix = CostMatrix::new(side, side, data)?;
        for (r, c) in solve_assignment(&matrix)? {
            if r < n_tracks && c < n_obs {
                let ti = live[r];
                tracks.tracks[ti].absorb(&observations[c], t, params.confirm_hits);
                report.matches.push((tracks.tracks[ti].track_id, c));
                matched_obs[c] = true;
                matched_tracks[r] = true;
            }
        }
    }

    // Unmatched live tracks miss; too many consecutive misses is terminal.
    for (r, &ti) in live.iter().enumerate() {
        if matched_tracks[r] {
            continue;
        }
        let track = &mut tracks.tracks[ti];
        track.misses += 1;
        if track.misses >= params.lost_after_misses {
            track.state = TrackState::Lost;
            report.lost.push(track.track_id);
        }
    }

    // Unmatched observations spawn tentative tracks, in observation order.
    for (oi, obs) in observations.iter().enumerate() {
        if matched_obs[oi] {
            continue;
        }
        let id = tracks.next_id;
        tracks.next_id += 1;
        tracks.tracks.push(TrackedObject::new(id, obs, t));
        report.spawned.push(id);
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::descriptor::encode_descriptor;
    use crate::perception::observation::ObservationSource;

    fn obs_at(x: f64, label: &str, true_id: u32) -> ObjectObservation {
        let aabb = Aabb::new([x - 0.5, -0.5, 0.0], [x + 0.5, 0.5, 1.0]);
        ObjectObservation {
            source: ObservationSource::Fused,
            aabb_world: aabb,
            centroid: aabb.center(),
            mask_pixels: None,
            point_indices: None,
            label: label.to_string(),
            embedding: encode_descriptor(&[], &[], Some(label)).unwrap(),
            confidence: 1.0,
            true_id: Some(true_id),
        }
    }

    #[test]
    fn empty_trackset_spawns_tentative_tracks_with_sequential_ids() {
        let mut ts = TrackSet::new();
        let report =
            track_objects(&mut ts, &[obs_at(0.0, "a", 1), obs_at(5.0, "b", 2)], 0.0, &TrackParams::default())
                .unwrap();
        assert_eq!(report.spawned, vec![0, 1]);
        assert_eq!(ts.tracks.len(), 2);
        assert!(ts.tracks.iter().all(|t| t.state == TrackState::Tentative));
    }

    #[test]
    fn static_scene_keeps_ids_stable() {
        let mut ts = TrackSet::new();
        let params = TrackParams::default();
        for k in 0..10 {
            let t = k as f64 * 0.1;
            let report =
                track_objects(&mut ts, &[obs_at(0.0, "a", 1), obs_at(5.0, "b", 2)], t, &params)
                    .unwrap();
            if k > 0 {
                assert_eq!(report.spawned.len(), 0, "no new tracks after the first frame");
            }
        }
        assert_eq!(ts.tracks.len(), 2);
        assert!(ts.tracks.iter().all(|t| t.state == TrackState::Confirmed));
        assert!(ts.tracks.iter().all(|t| t.hits == 10));
    }

    #[test]
    fn track_is_lost_after_five_consecutive_misses() {
        let mut ts = TrackSet::new();
        let params = TrackParams::default();
        for k in 0..3 {
            track_objects(&mut ts, &[obs_at(0.0, "a", 1)], k as f64 * 0.1, &params).unwrap();
        }
        assert_eq!(ts.tracks[0].state, TrackState::Confirmed);
        for k in 3..9 {
            track_objects(&mut ts, &[], k as f64 * 0.1, &params).unwrap();
        }
        assert_eq!(ts.tracks[0].state, TrackState::Lost);
        assert_eq!(ts.tracks[0].misses, 5);
        // Lost is terminal: a new object at the same spot spawns a new id.
        let report = track_objects(&mut ts, &[obs_at(0.0, "a", 1)], 1.0, &params).unwrap();
        assert_eq!(report.spawned, vec![1]);
    }

    #[test]
    fn ids_are_never_reused() {
        let mut ts = TrackSet::new();
        let params = TrackParams { lost_after_misses: 1, ..Default::default() };
        track_objects(&mut ts, &[obs_at(0.0, "a", 1)], 0.0, &params).unwrap();
        track_objects(&mut ts, &[], 0.1, &params).unwrap();
        track_objects(&mut ts, &[obs_at(0.0, "a", 1)], 0.2, &params).unwrap();
        let ids: Vec<u64> = ts.tracks.iter().map(|t| t.track_id).collect();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn moving_object_follows_constant_velocity_prediction() {
        let mut ts = TrackSet::new();
        let params = TrackParams::default();
        for k in 0..8 {
            let t = k as f64 * 0.1;
            let x = 1.0 * t; // 1 m/s
            track_objects(&mut ts, &[obs_at(x, "runner", 3)], t, &params).unwrap();
        }
        assert_eq!(ts.tracks.len(), 1, "a steadily moving object keeps one id");
        let v = ts.tracks[0].velocity();
        assert!((v.x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_monotonic_time_is_rejected() {
        let mut ts = TrackSet::new();
        track_objects(&mut ts, &[], 1.0, &TrackParams::default()).unwrap();
        let err = track_objects(&mut ts, &[], 1.0, &TrackParams::default()).unwrap_err();
        assert!(matches!(err, TrackError::NonMonotonicTime { .. }));
    }

    #[test]
    fn confirmed_tracks_have_at_least_three_hits() {
        let mut ts = TrackSet::new();
        let params = TrackParams::default();
        for k in 0..5 {
            track_objects(&mut ts, &[obs_at(0.0, "a", 1)], k as f64 * 0.1, &params).unwrap();
            for tr in &ts.tracks {
                if tr.state == TrackState::Confirmed {
                    assert!(tr.hits >= 3);
                }
            }
        }
    }
}
