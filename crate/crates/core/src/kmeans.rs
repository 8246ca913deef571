//! Lloyd's k-means seeded with caller-supplied centres.

use crate::geom::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig<T> {
    pub max_iters: usize,
    /// Stop once no centre moves further than this (metres).
    pub tolerance: T,
}

impl<T: Scalar> Default for KMeansConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tolerance: T::lit(1e-4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    pub centres: Vec<Point2<T>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Index of the nearest centre; ties go to the lower index.
pub fn nearest<T: Scalar>(centres: &[Point2<T>], p: Point2<T>) -> usize {
    let mut best = 0;
    let mut best_d = centres[0].distance_sq(p);
    for (i, c) in centres.iter().enumerate().skip(1) {
        let d = c.distance_sq(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Runs Lloyd iterations from `initial`. A centre whose cluster empties keeps its
/// previous position, so the number of centres never changes.
pub fn kmeans<T: Scalar>(
    points: &[Point2<T>],
    initial: &[Point2<T>],
    config: &KMeansConfig<T>,
) -> KMeansFit<T> {
    let mut centres = initial.to_vec();
    if centres.is_empty() || points.is_empty() {
        return KMeansFit {
            centres,
            iterations: 0,
            converged: true,
        };
    }
    let k = centres.len();
    let mut sums = vec![Point2::new(T::zero(), T::zero()); k];
    let mut counts = vec![0usize; k];
    for iter in 1..=config.max_iters {
        sums.iter_mut().for_each(|s| *s = Point2::new(T::zero(), T::zero()));
        counts.iter_mut().for_each(|c| *c = 0);
        for &p in points {
            let c = nearest(&centres, p);
            sums[c] = sums[c].add(p);
            counts[c] += 1;
        }
        let mut max_shift = T::zero();
        for i in 0..k {
            if counts[i] == 0 {
                continue;
            }
            let mean = sums[i].scale(T::one() / T::from_usize(counts[i]).unwrap());
            max_shift = max_shift.max(mean.distance(centres[i]));
            centres[i] = mean;
        }
        if max_shift < config.tolerance {
            return KMeansFit {
                centres,
                iterations: iter,
                converged: true,
            };
        }
    }
    KMeansFit {
        centres,
        iterations: config.max_iters,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line<T: Scalar>(xs: &[f64]) -> Vec<Point2<T>> {
        xs.iter().map(|&x| Point2::new(T::lit(x), T::zero())).collect()
    }

    /// Hand-run Lloyd: {0..5} from {0,5} splits {0,1,2}|{3,4,5} (2 ties to the lower
    /// centre on the first pass) and stays there.
    #[test]
    fn one_dimensional_lane_converges_to_partition_means() {
        let fit = kmeans(
            &line::<f64>(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
            &line(&[0.0, 5.0]),
            &KMeansConfig::default(),
        );
        assert!(fit.converged);
        assert_eq!(fit.centres, line(&[1.0, 4.0]));
        let fit32 = kmeans(
            &line::<f32>(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
            &line(&[0.0, 5.0]),
            &KMeansConfig::default(),
        );
        assert_eq!(fit32.centres, line(&[1.0, 4.0]));
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let pts = line::<f64>(&[0.0, 2.0, 10.0, 12.0]);
        let fit = kmeans(&pts, &line(&[1.0, 11.0]), &KMeansConfig::default());
        assert_eq!(fit.centres, line(&[1.0, 11.0]));
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn empty_cluster_keeps_centre() {
        let pts = line::<f64>(&[0.0, 1.0]);
        let fit = kmeans(&pts, &line(&[0.5, 100.0]), &KMeansConfig::default());
        assert_eq!(fit.centres[1], Point2::new(100.0, 0.0));
        assert_eq!(fit.centres.len(), 2);
    }
}
