//! Greedy overlap-based association within and across frames.
//!
//! Ties in IOU are broken by comparing ids lexicographically, so the output
//! partition does not depend on input order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{sort_tracks, Observation, ObservationBundle, SceneError, Track};
use crate::geometry::iou3d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    pub iou_threshold: f64,
    /// Largest frame-index difference between consecutive bundles of a track.
    pub max_gap: usize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            iou_threshold: 0.5,
            max_gap: 1,
        }
    }
}

impl AssociationConfig {
    pub fn check(&self) -> Result<(), SceneError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(SceneError::Threshold(self.iou_threshold));
        }
        if self.max_gap == 0 {
            return Err(SceneError::MaxGap);
        }
        Ok(())
    }
}

/// Candidate link between two items, ordered best first.
struct Candidate<'a> {
    iou: f64,
    left: &'a str,
    right: &'a str,
    i: usize,
    j: usize,
}

fn best_first(a: &Candidate<'_>, b: &Candidate<'_>) -> Ordering {
    b.iou
        .total_cmp(&a.iou)
        .then_with(|| a.left.cmp(b.left))
        .then_with(|| a.right.cmp(b.right))
}

/// Groups same-frame observations from distinct sources by descending IOU.
///
/// A pair at or above `iou_threshold` merges its two groups unless the merge
/// would put two observations from the same source name into one bundle.
pub fn bundle_frame(
    mut observations: Vec<Observation>,
    iou_threshold: f64,
) -> Result<Vec<ObservationBundle>, SceneError> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(SceneError::Threshold(iou_threshold));
    }
    let Some(first) = observations.first() else {
        return Ok(Vec::new());
    };
    let frame = first.frame_index;
    if let Some(o) = observations.iter().find(|o| o.frame_index != frame) {
        return Err(SceneError::MixedFrames(frame, o.frame_index));
    }
    observations.sort_by(|a, b| a.id.cmp(&b.id));

    let n = observations.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&observations[i], &observations[j]);
            if a.source.name == b.source.name {
                continue;
            }
            let iou = iou3d(&a.bbox, &b.bbox);
            if iou >= iou_threshold {
                pairs.push(Candidate {
                    iou,
                    left: &a.id,
                    right: &b.id,
                    i,
                    j,
                });
            }
        }
    }
    pairs.sort_by(best_first);

    // group[i] is the group index of observation i; groups hold member indices.
    let mut group: Vec<usize> = (0..n).collect();
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for p in &pairs {
        let (gi, gj) = (group[p.i], group[p.j]);
        if gi == gj {
            continue;
        }
        let clash = groups[gi].iter().any(|&a| {
            groups[gj]
                .iter()
                .any(|&b| observations[a].source.name == observations[b].source.name)
        });
        if clash {
            continue;
        }
        let moved = std::mem::take(&mut groups[gj]);
        for &m in &moved {
            group[m] = gi;
        }
        groups[gi].extend(moved);
    }

    let mut slots: Vec<Option<Observation>> = observations.into_iter().map(Some).collect();
    let mut bundles = Vec::new();
    for members in groups.into_iter().filter(|g| !g.is_empty()) {
        let obs: Vec<Observation> = members
            .iter()
            .map(|&m| slots[m].take().expect("each observation used once"))
            .collect();
        bundles.push(ObservationBundle::new(obs)?);
    }
    bundles.sort_by(|a, b| a.id().cmp(b.id()));
    Ok(bundles)
}

struct OpenTrack {
    bundles: Vec<ObservationBundle>,
}

impl OpenTrack {
    fn last(&self) -> &ObservationBundle {
        &self.bundles[self.bundles.len() - 1]
    }

    fn id(&self) -> &str {
        self.bundles[0].id()
    }
}

/// Links bundles across frames into tracks.
///
/// For each frame in order, every open track whose last bundle lies at most
/// `max_gap` frames back competes for the frame's bundles; pairs are taken
/// greedily by descending IOU of the representative boxes. Bundles left
/// unmatched start new tracks.
pub fn build_tracks(
    mut bundles: Vec<ObservationBundle>,
    config: &AssociationConfig,
) -> Result<Vec<Track>, SceneError> {
    config.check()?;
    bundles.sort_by(|a, b| {
        a.frame_index()
            .cmp(&b.frame_index())
            .then_with(|| a.id().cmp(b.id()))
    });

    let mut open: Vec<OpenTrack> = Vec::new();
    let mut closed: Vec<OpenTrack> = Vec::new();
    let mut iter = bundles.into_iter().peekable();
    while let Some(first) = iter.next() {
        let frame = first.frame_index();
        let mut current = vec![first];
        while let Some(b) = iter.next_if(|b| b.frame_index() == frame) {
            current.push(b);
        }

        let (live, stale): (Vec<_>, Vec<_>) = std::mem::take(&mut open)
            .into_iter()
            .partition(|t| frame - t.last().frame_index() <= config.max_gap);
        closed.extend(stale);
        open = live;

        let mut candidates = Vec::new();
        for (i, t) in open.iter().enumerate() {
            let anchor = &t.last().representative().bbox;
            for (j, b) in current.iter().enumerate() {
                let iou = iou3d(anchor, &b.representative().bbox);
                if iou >= config.iou_threshold {
                    candidates.push(Candidate {
                        iou,
                        left: t.id(),
                        right: b.id(),
                        i,
                        j,
                    });
                }
            }
        }
        candidates.sort_by(best_first);

        let mut track_taken = vec![false; open.len()];
        let mut assignment: Vec<Option<usize>> = vec![None; current.len()];
        for c in &candidates {
            if track_taken[c.i] || assignment[c.j].is_some() {
                continue;
            }
            track_taken[c.i] = true;
            assignment[c.j] = Some(c.i);
        }
        drop(candidates);

        for (bundle, target) in current.into_iter().zip(assignment) {
            match target {
                Some(i) => open[i].bundles.push(bundle),
                None => open.push(OpenTrack {
                    bundles: vec![bundle],
                }),
            }
        }
    }
    closed.extend(open);

    let mut tracks = closed
        .into_iter()
        .map(|t| Track::new(t.bundles))
        .collect::<Result<Vec<_>, _>>()?;
    sort_tracks(&mut tracks);
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;

    fn cube(x: f64) -> Box3D {
        Box3D::axis_aligned([x, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap()
    }

    /// Offset along x that gives two unit cubes the requested IOU.
    fn offset_for_iou(iou: f64) -> f64 {
        // (1 - d) / (1 + d) = iou
        (1.0 - iou) / (1.0 + iou)
    }

    fn ids(bundles: &[ObservationBundle]) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = bundles
            .iter()
            .map(|b| b.members().iter().map(|o| o.id.clone()).collect())
            .collect();
        out.sort();
        out
    }

    /// Repeatedly takes the global best admissible pair; recomputes from
    /// scratch at every step.
    fn greedy_oracle(obs: &[Observation], thr: f64) -> Vec<Vec<String>> {
        let mut groups: Vec<Vec<usize>> = (0..obs.len()).map(|i| vec![i]).collect();
        loop {
            let mut best: Option<(f64, String, String, usize, usize)> = None;
            for a in 0..groups.len() {
                for b in 0..groups.len() {
                    if a == b {
                        continue;
                    }
                    let clash = groups[a].iter().any(|&x| {
                        groups[b].iter().any(|&y| obs[x].source.name == obs[y].source.name)
                    });
                    if clash {
                        continue;
                    }
                    for &x in &groups[a] {
                        for &y in &groups[b] {
                            let (l, r) = if obs[x].id < obs[y].id { (x, y) } else { (y, x) };
                            let iou = iou3d(&obs[l].bbox, &obs[r].bbox);
                            if iou < thr {
                                continue;
                            }
                            let key = (iou, obs[l].id.clone(), obs[r].id.clone(), a, b);
                            let better = match &best {
                                None => true,
                                Some(bk) => {
                                    key.0 > bk.0
                                        || (key.0 == bk.0 && (&key.1, &key.2) < (&bk.1, &bk.2))
                                }
                            };
                            if better {
                                best = Some(key);
                            }
                        }
                    }
                }
            }
            let Some((_, _, _, a, b)) = best else { break };
            let moved = std::mem::take(&mut groups[b]);
            groups[a].extend(moved);
            groups.retain(|g| !g.is_empty());
        }
        let mut out: Vec<Vec<String>> = groups
            .into_iter()
            .map(|g| {
                let mut v: Vec<String> = g.into_iter().map(|i| obs[i].id.clone()).collect();
                v.sort();
                v
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn model_and_human_pair_is_bundled() {
        let d = offset_for_iou(0.8);
        let obs = vec![
            Observation::model("m", 0, "car", cube(0.0), 0.9),
            Observation::human("h", 0, "car", cube(d)),
        ];
        let got = ids(&bundle_frame(obs.clone(), 0.5).unwrap());
        assert_eq!(got, greedy_oracle(&obs, 0.5));
        assert_eq!(got, vec![vec!["h".to_string(), "m".to_string()]]);
    }

    #[test]
    fn disjoint_boxes_stay_apart() {
        let obs = vec![
            Observation::model("m", 0, "car", cube(0.0), 0.9),
            Observation::human("h", 0, "car", cube(50.0)),
        ];
        assert_eq!(bundle_frame(obs, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn best_partner_wins() {
        // human boxes on either side of the model box
        let obs = vec![
            Observation::model("m", 0, "car", cube(0.0), 0.9),
            Observation::human("h1", 0, "car", cube(offset_for_iou(0.9))),
            Observation::human("h2", 0, "car", cube(-offset_for_iou(0.6))),
        ];
        assert!((iou3d(&obs[0].bbox, &obs[1].bbox) - 0.9).abs() < 1e-12);
        assert!((iou3d(&obs[0].bbox, &obs[2].bbox) - 0.6).abs() < 1e-12);
        let got = ids(&bundle_frame(obs.clone(), 0.5).unwrap());
        assert_eq!(got, greedy_oracle(&obs, 0.5));
        assert_eq!(
            got,
            vec![vec!["h1".to_string(), "m".to_string()], vec!["h2".to_string()]]
        );
    }

    #[test]
    fn greedy_matches_oracle_on_small_random_frames() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let sources = ["lidar", "radar", "vendor"];
        for _ in 0..300 {
            let n = 2 + (unit() * 5.0) as usize;
            let obs: Vec<Observation> = (0..n)
                .map(|i| {
                    let x = unit() * 1.5;
                    let y = unit() * 0.6;
                    let b = Box3D::axis_aligned([x, y, 0.0], [1.0, 1.0, 1.0]).unwrap();
                    let src = sources[(unit() * 3.0) as usize % 3];
                    Observation::model(format!("o{i}"), 0, "car", b, 0.5)
                        .with_source(crate::scene::Source::model(src))
                })
                .collect();
            let got = ids(&bundle_frame(obs.clone(), 0.3).unwrap());
            assert_eq!(got, greedy_oracle(&obs, 0.3));
        }
    }

    #[test]
    fn mixed_frames_rejected() {
        let obs = vec![
            Observation::model("a", 0, "car", cube(0.0), 0.9),
            Observation::model("b", 1, "car", cube(0.0), 0.9),
        ];
        assert_eq!(bundle_frame(obs, 0.5), Err(SceneError::MixedFrames(0, 1)));
        assert_eq!(bundle_frame(vec![], 0.0), Err(SceneError::Threshold(0.0)));
    }

    fn singles(frames: impl IntoIterator<Item = usize>, x: f64, tag: &str) -> Vec<ObservationBundle> {
        frames
            .into_iter()
            .map(|f| {
                ObservationBundle::singleton(Observation::model(
                    format!("{tag}{f:02}"),
                    f,
                    "car",
                    cube(x),
                    0.9,
                ))
            })
            .collect()
    }

    #[test]
    fn stationary_box_forms_one_track() {
        let tracks = build_tracks(singles(0..10, 0.0, "a"), &AssociationConfig::default()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].bundles().len(), 10);
    }

    #[test]
    fn distant_boxes_form_two_tracks() {
        let mut b = singles(0..10, 0.0, "a");
        b.extend(singles(0..10, 100.0, "b"));
        let tracks = build_tracks(b, &AssociationConfig::default()).unwrap();
        assert_eq!(tracks.len(), 2);
        assert!(tracks.iter().all(|t| t.bundles().len() == 10));
    }

    #[test]
    fn gap_policy() {
        // frames 0-3 and 5-9: a gap of two frames between 3 and 5
        let frames: Vec<usize> = (0..4).chain(5..10).collect();
        let gap2 = AssociationConfig {
            max_gap: 2,
            ..Default::default()
        };
        let tracks = build_tracks(singles(frames.clone(), 0.0, "a"), &gap2).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].bundles().len(), 9);

        let tracks = build_tracks(singles(frames, 0.0, "a"), &AssociationConfig::default()).unwrap();
        let lens: Vec<usize> = tracks.iter().map(|t| t.bundles().len()).collect();
        assert_eq!(lens, vec![4, 5]);
    }

    #[test]
    fn empty_input_gives_no_tracks() {
        assert!(build_tracks(vec![], &AssociationConfig::default())
            .unwrap()
            .is_empty());
    }
}
