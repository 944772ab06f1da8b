//! Centroid sampling and neighbourhood grouping for the set-abstraction stage.

use super::DemError;

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Greedy farthest point sampling. The first pick is `start`; each further
/// pick maximises the distance to everything picked so far, ties going to
/// the lowest index.
pub fn farthest_point_sampling(
    points: &[[f64; 2]],
    k: usize,
    start: usize,
) -> Result<Vec<usize>, DemError> {
    if k == 0 || k > points.len() {
        return Err(DemError::SampleCount {
            requested: k,
            available: points.len(),
        });
    }
    if start >= points.len() {
        return Err(DemError::SampleCount {
            requested: start + 1,
            available: points.len(),
        });
    }
    let mut picked = Vec::with_capacity(k);
    let mut nearest: Vec<f64> = points.iter().map(|&p| dist2(p, points[start])).collect();
    let mut taken = vec![false; points.len()];
    picked.push(start);
    taken[start] = true;
    while picked.len() < k {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in nearest.iter().enumerate() {
            if !taken[i] && d > best_d {
                best = i;
                best_d = d;
            }
        }
        picked.push(best);
        taken[best] = true;
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(*p, points[best]));
        }
    }
    Ok(picked)
}

/// Indices of the points within `radius` of `centroid`, lowest index first,
/// at most `max_neighbors` of them. Never empty: with nothing in range the
/// single nearest point is returned.
pub fn ball_query(
    points: &[[f64; 2]],
    centroid: [f64; 2],
    radius: f64,
    max_neighbors: usize,
) -> Vec<usize> {
    let r2 = radius * radius;
    let inside: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| dist2(**p, centroid) <= r2)
        .map(|(i, _)| i)
        .take(max_neighbors.max(1))
        .collect();
    if !inside.is_empty() || points.is_empty() {
        return inside;
    }
    let nearest = points
        .iter()
        .enumerate()
        .min_by(|a, b| dist2(*a.1, centroid).total_cmp(&dist2(*b.1, centroid)))
        .map(|(i, _)| i)
        .expect("non-empty");
    vec![nearest]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive max-min oracle for choosing the second sample.
    fn best_second(points: &[[f64; 2]], start: usize) -> usize {
        (0..points.len())
            .max_by(|&a, &b| {
                dist2(points[a], points[start])
                    .total_cmp(&dist2(points[b], points[start]))
                    .then(b.cmp(&a))
            })
            .unwrap()
    }

    #[test]
    fn fps_collinear_example() {
        let pts = [[1.0, 0.0], [0.0, 0.0], [10.0, 0.0]];
        assert_eq!(best_second(&pts, 1), 2);
        assert_eq!(farthest_point_sampling(&pts, 2, 1).unwrap(), vec![1, 2]);
    }

    #[test]
    fn fps_edge_cases() {
        let pts = [[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0], [0.5, 0.5]];
        assert_eq!(farthest_point_sampling(&pts, 1, 2).unwrap(), vec![2]);
        let mut all = farthest_point_sampling(&pts, 4, 0).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(matches!(
            farthest_point_sampling(&pts, 5, 0),
            Err(DemError::SampleCount { .. })
        ));
        assert!(farthest_point_sampling(&pts, 0, 0).is_err());
    }

    #[test]
    fn fps_ties_go_to_lowest_index() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]];
        assert_eq!(farthest_point_sampling(&pts, 2, 0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn ball_query_rules() {
        let pts = [
            [0.0, 0.0],
            [0.5, 0.0],
            [5.0, 5.0],
            [0.1, 0.1],
            [0.2, 0.0],
            [0.3, 0.0],
        ];
        assert_eq!(ball_query(&pts, [5.0, 5.0], 0.1, 4), vec![2]);
        assert_eq!(ball_query(&pts, [0.0, 0.0], 1.0, 3), vec![0, 1, 3]);
        assert_eq!(ball_query(&pts, [20.0, 20.0], 1.0, 3), vec![2]);
        assert!(ball_query(&[], [0.0, 0.0], 1.0, 3).is_empty());
    }

    proptest! {
        #[test]
        fn fps_depends_only_on_the_set(
            pts in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 3..25),
            k in 1usize..3,
            rot in 0usize..25,
        ) {
            // generic positions have no ties, so the selected coordinates must
            // not depend on how the list is ordered
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let k = k.min(pts.len());
            let start = pts[0];
            let picked: Vec<[f64; 2]> = farthest_point_sampling(&pts, k, 0)
                .unwrap()
                .into_iter()
                .map(|i| pts[i])
                .collect();
            let mut rotated = pts.clone();
            rotated.rotate_left(rot % pts.len());
            let s = rotated.iter().position(|p| *p == start).unwrap();
            let picked2: Vec<[f64; 2]> = farthest_point_sampling(&rotated, k, s)
                .unwrap()
                .into_iter()
                .map(|i| rotated[i])
                .collect();
            prop_assert_eq!(picked, picked2);
        }
    }
}
