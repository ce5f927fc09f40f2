//! Quadrature rules on the reference triangle `{x, y >= 0, x + y <= 1}`.
//!
//! Points are stored as barycentric triples with respect to the triangle
//! vertices `(v0, v1, v2)`; weights are reference weights summing to 1/2, so
//! a physical integral is `2|K| * Σ w_p f(x_p)`. All weights are positive.
//! Rules above degree 2 are conical products of Gauss-Legendre and
//! Gauss-Jacobi lines.

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the quadrature points.
    pub points: Vec<[f64; 3]>,
    /// Reference weights, summing to 1/2.
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub exact_degree: u32,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical location of quadrature point `k` in the triangle with the
    /// given vertices.
    pub fn point_in(&self, k: usize, v: &[[f64; 2]; 3]) -> [f64; 2] {
        let b = self.points[k];
        [
            b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
            b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
        ]
    }
}

/// Default exactness degree used for every nonlinear or estimator integrand.
pub const DEFAULT_DEGREE: u32 = 8;

/// Rule with `exact_degree >= degree` and positive weights, `1 <= degree <= 8`.
pub fn quadrature(degree: u32) -> Result<&'static QuadratureRule> {
    match degree {
        1 => Ok(&CENTROID),
        2 => Ok(&THREE_POINT),
        3..=5 => Ok(&CONICAL_3),
        6 | 7 => Ok(&CONICAL_4),
        8 => Ok(&CONICAL_5),
        _ => Err(Error::InvalidArgument(format!(
            "quadrature degree must be in 1..=8, got {degree}"
        ))),
    }
}

/// The crate-wide default rule (degree [`DEFAULT_DEGREE`]).
pub fn default_rule() -> &'static QuadratureRule {
    &CONICAL_5
}

fn from_xyw(table: &[[f64; 3]], exact_degree: u32) -> QuadratureRule {
    let points = table
        .iter()
        .map(|&[x, y, _]| [1.0 - x - y, x, y])
        .collect();
    let weights = table.iter().map(|&[_, _, w]| w).collect();
    QuadratureRule {
        points,
        weights,
        exact_degree,
    }
}

static CENTROID: Lazy<QuadratureRule> = Lazy::new(|| QuadratureRule {
    points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
    weights: vec![0.5],
    exact_degree: 1,
});

static THREE_POINT: Lazy<QuadratureRule> = Lazy::new(|| QuadratureRule {
    points: vec![
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ],
    weights: vec![1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0],
    exact_degree: 2,
});

// Conical product rules: reference coordinates (x, y) and weight per row.
static CONICAL_3: Lazy<QuadratureRule> = Lazy::new(|| {
    from_xyw(
        &[
            [1.02717654809626260e-01, 8.85879595127039288e-02, 5.58144204830443580e-02],
            [6.65540678391644963e-02, 4.09466864440734768e-01, 6.36780850998850817e-02],
            [2.39311322870806205e-02, 7.87659461760847002e-01, 1.93963833059595005e-02],
            [4.55706020243648036e-01, 8.85879595127039288e-02, 8.93030727728708756e-02],
            [2.95266567779632616e-01, 4.09466864440734768e-01, 1.01884936159816017e-01],
            [1.06170269119576499e-01, 7.87659461760847002e-01, 3.10342132895351681e-02],
            [8.08694385677669825e-01, 8.85879595127039288e-02, 5.58144204830443580e-02],
            [5.23979067720100722e-01, 4.09466864440734768e-01, 6.36780850998850817e-02],
            [1.88409405952072367e-01, 7.87659461760847002e-01, 1.93963833059595005e-02],
        ],
        5,
    )
});

static CONICAL_4: Lazy<QuadratureRule> = Lazy::new(|| {
    from_xyw(
        &[
            [6.54669945550144516e-02, 5.71041961145177246e-02, 2.35683681933823996e-02],
            [5.02101232113697782e-02, 2.76843013638123803e-01, 3.53880678980858926e-02],
            [2.89120842243890119e-02, 5.83590432368916834e-01, 2.25840492823699071e-02],
            [9.70378512694610937e-03, 8.60240135656219485e-01, 5.42322591052525355e-03],
            [3.11164552244357018e-01, 5.71041961145177246e-02, 4.41850885223618595e-02],
            [2.38648659731442919e-01, 2.76843013638123803e-01, 6.63442161070496583e-02],
            [1.37419104134574366e-01, 5.83590432368916834e-01, 4.23397245217462595e-02],
            [4.61220799064520348e-02, 8.60240135656219485e-01, 1.01672595644787880e-02],
            [6.31731251641125202e-01, 5.71041961145177246e-02, 4.41850885223618595e-02],
            [4.84508326630433250e-01, 2.76843013638123803e-01, 6.63442161070496583e-02],
            [2.78990463496508800e-01, 5.83590432368916834e-01, 4.23397245217462595e-02],
            [9.36377844373284807e-02, 8.60240135656219485e-01, 1.01672595644787880e-02],
            [8.77428809330467741e-01, 5.71041961145177246e-02, 2.35683681933823996e-02],
            [6.72946863150506336e-01, 2.76843013638123803e-01, 3.53880678980858926e-02],
            [3.87497483406694154e-01, 5.83590432368916834e-01, 2.25840492823699071e-02],
            [1.30056079216834403e-01, 8.60240135656219485e-01, 5.42322591052525355e-03],
        ],
        7,
    )
});

static CONICAL_5: Lazy<QuadratureRule> = Lazy::new(|| {
    from_xyw(
        &[
            [4.50425935698037377e-02, 3.98098570514687222e-02, 1.14650803515925180e-02],
            [3.76212523451112044e-02, 1.98013417873608211e-01, 1.98040831320473593e-02],
            [2.63646449444709247e-02, 4.37974810247386159e-01, 1.73415064313656962e-02],
            [1.42857943955713874e-02, 6.95464273353636142e-01, 8.75549918216382908e-03],
            [4.62228846504642975e-03, 9.01464914201173584e-01, 1.86555216687784024e-03],
            [2.21578609552379208e-01, 3.98098570514687222e-02, 2.31612219294983421e-02],
            [1.85070710267389443e-01, 1.98013417873608211e-01, 4.00072873861604603e-02],
            [1.29695936782254106e-01, 4.37974810247386159e-01, 3.50325045033717322e-02],
            [7.02762920082817127e-02, 6.95464273353636142e-01, 1.76874521104834689e-02],
            [2.27384830637640326e-02, 9.01464914201173584e-01, 3.76870169532762637e-03],
            [4.80095071474265667e-01, 3.98098570514687222e-02, 2.75289856644697593e-02],
            [4.00993291063195922e-01, 1.98013417873608211e-01, 4.75518970579540540e-02],
            [2.81012594876306920e-01, 4.37974810247386159e-01, 4.16389652151949868e-02],
            [1.52267863323181929e-01, 6.95464273353636142e-01, 2.10229674873220820e-02],
            [4.92675428994132081e-02, 9.01464914201173584e-01, 4.47940679728136594e-03],
            [7.38611533396152042e-01, 3.98098570514687222e-02, 2.31612219294983421e-02],
            [6.16915871859002318e-01, 1.98013417873608211e-01, 4.00072873861604603e-02],
            [4.32329252970359679e-01, 4.37974810247386159e-01, 3.50325045033717322e-02],
            [2.34259434638082131e-01, 6.95464273353636142e-01, 1.76874521104834689e-02],
            [7.57966027350623767e-02, 9.01464914201173584e-01, 3.76870169532762637e-03],
            [9.15147549378727554e-01, 3.98098570514687222e-02, 1.14650803515925180e-02],
            [7.64365329781280578e-01, 1.98013417873608211e-01, 1.98040831320473593e-02],
            [5.35660544808142847e-01, 4.37974810247386159e-01, 1.73415064313656962e-02],
            [2.90249932250792431e-01, 6.95464273353636142e-01, 8.75549918216382908e-03],
            [9.39127973337799821e-02, 9.01464914201173584e-01, 1.86555216687784024e-03],
        ],
        9,
    )
});
