use crate::error::{Error, Result};

/// Two-component PCA of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Centered points projected onto the two components.
    pub points: Vec<[f64; 2]>,
    /// Unit principal axes, largest variance first.
    pub components: [Vec<f64>; 2],
    /// Sample variance (divided by `n - 1`) along each axis.
    pub variances: [f64; 2],
    pub mean: Vec<f64>,
}

/// Projects onto the top two principal components of the mean-centered set.
pub fn reduce_2d(points: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    Ok(pca_2d(points)?.points)
}

/// Full PCA result. Each component's sign is chosen so its largest-magnitude
/// loading (first one on ties) is positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Projection> {
    let n = points.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry("need at least 3 points"));
    }
    let d = points[0].len();
    if d < 2 {
        return Err(Error::DegenerateGeometry("need at least 2 dimensions"));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::DegenerateGeometry("points differ in dimension"));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateGeometry("non-finite coordinate"));
    }

    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let scale = points.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
    let spread = centered.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    if spread <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry("all points coincide"));
    }

    let mut cov = vec![0.0; d * d];
    for p in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += p[i] * p[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / (n - 1) as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let (values, vectors) = jacobi_eigen(cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let component = |k: usize| -> Vec<f64> {
        let col = order[k];
        let mut v: Vec<f64> = (0..d).map(|r| vectors[r * d + col]).collect();
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let variances = [values[order[0]].max(0.0), values[order[1]].max(0.0)];
    let points = centered
        .iter()
        .map(|p| {
            let dot = |c: &[f64]| p.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect();
    Ok(Projection {
        points,
        components,
        variances,
        mean,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric `d x d` matrix.
/// Returns eigenvalues and the eigenvectors as columns of a row-major matrix.
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..d).map(|i| a[i * d + i]).collect();
    (values, v)
}
