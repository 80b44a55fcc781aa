//! Golden-section maximization of a unimodal scalar function.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[a, b]` until the bracket is narrower than `tol`.
/// Returns the abscissa and value of the best point seen.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Indices of the local maxima of a sampled curve. Non-finite samples are
/// treated as minus infinity; plateaus report their first index.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let v = |i: usize| {
        let x = values[i];
        if x.is_finite() {
            x
        } else {
            f64::NEG_INFINITY
        }
    };
    (0..values.len())
        .filter(|&i| {
            let here = v(i);
            here.is_finite()
                && (i == 0 || v(i - 1) < here)
                && (i + 1 == values.len() || v(i + 1) <= here)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-8);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn peak_at_boundary() {
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-6);
        assert!(x > 1.0 - 1e-5);
    }

    #[test]
    fn local_maxima_of_samples() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 0.7, 0.2]), vec![1, 3]);
        assert_eq!(local_maxima(&[f64::NAN, 1.0, 2.0]), vec![2]);
        assert_eq!(local_maxima(&[3.0, 2.0, 1.0]), vec![0]);
    }
}
