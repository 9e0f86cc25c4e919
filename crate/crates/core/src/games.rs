//! Game models: per-player partial gradients, the stacked game mapping, and
//! the regularity constants (player Lipschitz bounds, restricted strong
//! monotonicity) the convergence theory consumes.
//!
//! Players are 0-based. A joint profile is the concatenation of the players'
//! `action_dim`-sized blocks.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub trait Game: fmt::Debug + Send + Sync {
    fn players(&self) -> usize;

    fn action_dim(&self) -> usize;

    fn profile_dim(&self) -> usize {
        self.players() * self.action_dim()
    }

    /// Writes `∇_i J_i(x)` (one action block) into `out`.
    fn partial_gradient(&self, player: usize, x: &[f64], out: &mut [f64]);

    fn known_ne(&self) -> Option<Vec<f64>> {
        None
    }

    /// `(M, m)` with `F(x) = Mx + m`, for games whose mapping is affine.
    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }

    fn label(&self) -> String;
}

/// Stacks every player's partial gradient at the full-information profile.
pub fn game_mapping(game: &dyn Game, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), game.profile_dim(), "profile has wrong dimension");
    let da = game.action_dim();
    let mut out = vec![0.0; x.len()];
    for i in 0..game.players() {
        game.partial_gradient(i, x, &mut out[i * da..(i + 1) * da]);
    }
    out
}

/// Sensor connectivity game: player `i` (1-based `p = i + 1`) pays
/// `x_iᵀ(pI)x_i + x_iᵀ[p, p]ᵀ + p + ‖x_i − x_{next}‖²` with `next` the
/// following player on a ring. The unique equilibrium is every coordinate at
/// −0.5.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityGame {
    n: usize,
}

impl ConnectivityGame {
    pub const ACTION_DIM: usize = 2;
    pub const EQUILIBRIUM: f64 = -0.5;

    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "connectivity game needs at least 2 players, got {n}"
            )));
        }
        Ok(Self { n })
    }

    fn next(&self, i: usize) -> usize {
        (i + 1) % self.n
    }

    fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * Self::ACTION_DIM..(i + 1) * Self::ACTION_DIM]
    }

    /// `J_i(x)`, used to check the gradients by finite differences.
    pub fn cost(&self, i: usize, x: &[f64]) -> f64 {
        let p = (i + 1) as f64;
        let xi = self.block(x, i);
        let xj = self.block(x, self.next(i));
        let local: f64 = xi.iter().map(|v| p * v * v + p * v).sum::<f64>() + p;
        let coupling: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
        local + coupling
    }
}

impl Game for ConnectivityGame {
    fn players(&self) -> usize {
        self.n
    }

    fn action_dim(&self) -> usize {
        Self::ACTION_DIM
    }

    /// `2·r_ii·x_i + r_i + 2·(x_i − x_next)`.
    fn partial_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let p = (i + 1) as f64;
        let xi = self.block(x, i);
        let xj = self.block(x, self.next(i));
        for c in 0..Self::ACTION_DIM {
            out[c] = 2.0 * p * xi[c] + p + 2.0 * (xi[c] - xj[c]);
        }
    }

    fn known_ne(&self) -> Option<Vec<f64>> {
        Some(vec![Self::EQUILIBRIUM; self.profile_dim()])
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let da = Self::ACTION_DIM;
        let dim = self.profile_dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut v = DVector::zeros(dim);
        for i in 0..self.n {
            let p = (i + 1) as f64;
            let j = self.next(i);
            for c in 0..da {
                m[(i * da + c, i * da + c)] = 2.0 * p + 2.0;
                m[(i * da + c, j * da + c)] = -2.0;
                v[i * da + c] = p;
            }
        }
        Some((m, v))
    }

    fn label(&self) -> String {
        format!("connectivity(n={})", self.n)
    }
}

/// Game with affine mapping `F(x) = Mx + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGame {
    players: usize,
    action_dim: usize,
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl QuadraticGame {
    pub fn new(players: usize, action_dim: usize, matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let dim = players * action_dim;
        if players == 0 || action_dim == 0 {
            return Err(Error::Dimension("quadratic game needs players and action dims".into()));
        }
        if matrix.shape() != (dim, dim) || offset.len() != dim {
            return Err(Error::Dimension(format!(
                "quadratic game with {players} players x {action_dim} dims needs a {dim}x{dim} matrix \
                 and {dim}-vector, got {:?} and {}",
                matrix.shape(),
                offset.len()
            )));
        }
        Ok(Self {
            players,
            action_dim,
            matrix,
            offset,
        })
    }

    /// Scalar actions.
    pub fn scalar(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(n, 1, matrix, offset)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Reads `M` from a comma-separated matrix file and `m` from a file of
    /// comma- or newline-separated values.
    pub fn from_csv(matrix_path: &Path, offset_path: &Path, action_dim: usize) -> Result<Self> {
        let rows = read_csv_rows(matrix_path)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse {
                path: matrix_path.to_path_buf(),
                line: 0,
                msg: format!("matrix must be square, got {n} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        let offset: Vec<f64> = read_csv_rows(offset_path)?.concat();
        if action_dim == 0 || n % action_dim != 0 {
            return Err(Error::Dimension(format!("matrix size {n} not divisible by action dim {action_dim}")));
        }
        Self::new(
            n / action_dim,
            action_dim,
            DMatrix::from_row_slice(n, n, &rows.concat()),
            DVector::from_vec(offset),
        )
    }
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

impl Game for QuadraticGame {
    fn players(&self) -> usize {
        self.players
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn partial_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let da = self.action_dim;
        for (c, o) in out.iter_mut().enumerate().take(da) {
            let r = i * da + c;
            *o = self.matrix.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset[r];
        }
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.matrix.clone(), self.offset.clone()))
    }

    fn label(&self) -> String {
        format!("quadratic(n={}, d_a={})", self.players, self.action_dim)
    }
}

/// Solves `Mx = −m`.
pub fn quadratic_ne_oracle(game: &QuadraticGame) -> Result<Vec<f64>> {
    let lu = game.matrix.clone().lu();
    let x = lu.solve(&(-&game.offset)).ok_or(Error::Singular)?;
    let resid = (&game.matrix * &x + &game.offset).norm();
    if !resid.is_finite() || resid > 1e-10 * (1.0 + game.offset.norm()) {
        return Err(Error::Singular);
    }
    Ok(x.iter().copied().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameConstants {
    /// Lipschitz constant of each `∇_i J_i` over the full profile.
    pub player_lipschitz: Vec<f64>,
    /// `max_i L_i`
    pub l_m: f64,
    /// Smallest eigenvalue of the symmetric part of `M`.
    pub mu_r: f64,
    /// Largest singular value of `M`.
    pub mapping_lipschitz: f64,
}

/// Constants of an affine game mapping; rejects mappings whose symmetric part
/// is not positive definite.
pub fn affine_game_constants(matrix: &DMatrix<f64>, action_dim: usize) -> Result<GameConstants> {
    let dim = matrix.nrows();
    let sym = (matrix + matrix.transpose()) * 0.5;
    let mu_r = SymmetricEigen::new(sym).eigenvalues.min();
    if !(mu_r > 0.0) {
        return Err(Error::NotMonotone(mu_r));
    }
    let player_lipschitz: Vec<f64> = (0..dim / action_dim)
        .map(|i| {
            let block = matrix.rows(i * action_dim, action_dim).clone_owned();
            block.singular_values().max()
        })
        .collect();
    let l_m = player_lipschitz.iter().copied().fold(0.0, f64::max);
    Ok(GameConstants {
        player_lipschitz,
        l_m,
        mu_r,
        mapping_lipschitz: matrix.singular_values().max(),
    })
}

pub fn estimate_game_constants(game: &QuadraticGame) -> Result<GameConstants> {
    affine_game_constants(&game.matrix, game.action_dim)
}

/// Constants for any game exposing an affine form.
pub fn game_constants(game: &dyn Game) -> Result<GameConstants> {
    let (m, _) = game
        .affine_form()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no affine form", game.label())))?;
    affine_game_constants(&m, game.action_dim())
}

/// The equilibrium if the game knows it analytically, else the solution of
/// its affine mapping.
pub fn equilibrium(game: &dyn Game) -> Result<(Vec<f64>, EquilibriumSource)> {
    if let Some(ne) = game.known_ne() {
        return Ok((ne, EquilibriumSource::Analytic));
    }
    let (m, v) = game
        .affine_form()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no equilibrium oracle", game.label())))?;
    let q = QuadraticGame::new(game.players(), game.action_dim(), m, v)?;
    Ok((quadratic_ne_oracle(&q)?, EquilibriumSource::LinearSolve))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquilibriumSource {
    Analytic,
    LinearSolve,
    /// Long zero-threshold, uncompressed reference run.
    ReferenceRun,
}

impl fmt::Display for EquilibriumSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EquilibriumSource::Analytic => "analytic",
            EquilibriumSource::LinearSolve => "linear-solve",
            EquilibriumSource::ReferenceRun => "reference-run",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_player() -> QuadraticGame {
        // J1 = x1² + x1·x2, J2 = x2² − x1·x2
        QuadraticGame::scalar(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 2.0]),
            DVector::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn connectivity_gradient_examples() {
        let g = ConnectivityGame::new(4).unwrap();
        let mut out = [0.0; 2];
        let ne = g.known_ne().unwrap();
        for i in 0..4 {
            g.partial_gradient(i, &ne, &mut out);
            assert_eq!(out, [0.0, 0.0]);
        }
        // player 2 (1-based) at zero profile: gradient is r_2
        g.partial_gradient(1, &[0.0; 8], &mut out);
        assert_eq!(out, [2.0, 2.0]);
        // player 1 with x_1 = x_2 = [1, 0]
        let mut x = [0.0; 8];
        x[0] = 1.0;
        x[2] = 1.0;
        g.partial_gradient(0, &x, &mut out);
        assert_eq!(out, [3.0, 1.0]);
    }

    #[test]
    fn connectivity_mapping_vanishes_at_ne() {
        for n in [2, 3, 10, 50] {
            let g = ConnectivityGame::new(n).unwrap();
            let f = game_mapping(&g, &g.known_ne().unwrap());
            assert!(f.iter().all(|v| v.abs() <= 1e-12));
        }
        assert!(ConnectivityGame::new(1).is_err());
    }

    #[test]
    fn connectivity_affine_form_matches_gradients() {
        let g = ConnectivityGame::new(5).unwrap();
        let (m, v) = g.affine_form().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let affine = &m * DVector::from_column_slice(&x) + v;
        let direct = game_mapping(&g, &x);
        for (a, b) in affine.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        let k = game_constants(&g).unwrap();
        assert!(k.mu_r > 0.0);
        // last player: diag 2·5 + 2 = 12, coupling −2
        assert!((k.l_m - (144f64 + 4.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn connectivity_gradients_match_finite_differences() {
        let g = ConnectivityGame::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for _ in 0..100 {
            let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for i in 0..6 {
                let mut grad = [0.0; 2];
                g.partial_gradient(i, &x, &mut grad);
                for c in 0..2 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[2 * i + c] += h;
                    xm[2 * i + c] -= h;
                    let fd = (g.cost(i, &xp) - g.cost(i, &xm)) / (2.0 * h);
                    let rel = (fd - grad[c]).abs() / grad[c].abs().max(1.0);
                    assert!(rel < 1e-6, "player {i} coord {c}: fd {fd} vs {}", grad[c]);
                }
            }
        }
    }

    #[test]
    fn quadratic_mapping_example() {
        let g = two_player();
        assert_eq!(game_mapping(&g, &[1.0, 1.0]), vec![3.0, 1.0]);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(quadratic_ne_oracle(&two_player()).unwrap(), vec![0.0, 0.0]);
        let g = QuadraticGame::scalar(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]),
            DVector::from_vec(vec![-2.0, -4.0]),
        )
        .unwrap();
        let x = quadratic_ne_oracle(&g).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let singular = QuadraticGame::scalar(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(quadratic_ne_oracle(&singular), Err(Error::Singular)));
    }

    #[test]
    fn constants_examples() {
        let k = estimate_game_constants(&two_player()).unwrap();
        assert!((k.mu_r - 2.0).abs() < 1e-12);
        assert!((k.mapping_lipschitz - 5f64.sqrt()).abs() < 1e-12);
        assert!((k.l_m - 5f64.sqrt()).abs() < 1e-12);

        let scaled = QuadraticGame::scalar(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2)).unwrap();
        let k = estimate_game_constants(&scaled).unwrap();
        assert!((k.mu_r - 2.0).abs() < 1e-12 && (k.mapping_lipschitz - 2.0).abs() < 1e-12);

        let indefinite = QuadraticGame::scalar(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            DVector::zeros(2),
        )
        .unwrap();
        assert!(matches!(estimate_game_constants(&indefinite), Err(Error::NotMonotone(_))));
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let mp = dir.path().join("m.csv");
        let vp = dir.path().join("v.csv");
        std::fs::write(&mp, "2,1\n-1,2\n").unwrap();
        std::fs::write(&vp, "1\n-1\n").unwrap();
        let g = QuadraticGame::from_csv(&mp, &vp, 1).unwrap();
        assert_eq!(g.matrix(), two_player().matrix());
        assert_eq!(g.offset().as_slice(), &[1.0, -1.0]);
        std::fs::write(&mp, "2,1\n-1\n").unwrap();
        assert!(QuadraticGame::from_csv(&mp, &vp, 1).is_err());
    }

    proptest! {
        #[test]
        fn restricted_monotonicity_holds(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4;
            let mut m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            m += DMatrix::identity(n, n) * 3.0;
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let game = QuadraticGame::scalar(m, v).unwrap();
            let Ok(k) = estimate_game_constants(&game) else { return Ok(()); };
            let xs = quadratic_ne_oracle(&game).unwrap();
            let fs = game_mapping(&game, &xs);
            for _ in 0..1000 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let f = game_mapping(&game, &x);
                let inner: f64 = (0..n).map(|i| (f[i] - fs[i]) * (x[i] - xs[i])).sum();
                let d2: f64 = (0..n).map(|i| (x[i] - xs[i]).powi(2)).sum();
                prop_assert!(inner >= k.mu_r * d2 - 1e-9 * (1.0 + d2));
            }
        }
    }
}
