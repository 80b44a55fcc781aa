use gauss_quad::GaussLegendre as Rule;

/// Gauss-Legendre nodes and weights mapped onto a finite interval.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    points: Vec<(f64, f64)>,
}

impl GaussLegendre {
    pub fn on_interval(degree: usize, a: f64, b: f64) -> Self {
        let rule = Rule::new(degree).expect("Gauss-Legendre degree must be at least 2");
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let points = rule
            .nodes()
            .zip(rule.weights())
            .map(|(&x, &w)| (mid + half * x, half * w))
            .collect();
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().map(|&(x, w)| w * f(x)).sum()
    }
}
