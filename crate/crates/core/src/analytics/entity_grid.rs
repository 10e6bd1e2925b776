use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grammatical role of an entity in a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Role {
    Subject,
    Object,
    Other,
    Absent,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Subject, Role::Object, Role::Other, Role::Absent];

    pub fn symbol(self) -> &'static str {
        match self {
            Role::Subject => "S",
            Role::Object => "O",
            Role::Other => "X",
            Role::Absent => "-",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Role::Subject),
            "O" | "o" => Ok(Role::Object),
            "X" | "x" => Ok(Role::Other),
            "-" | "−" => Ok(Role::Absent),
            other => Err(Error::Data(format!("unknown entity role {other:?}"))),
        }
    }
}

impl TryFrom<String> for Role {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Role> for String {
    fn from(r: Role) -> String {
        r.symbol().to_string()
    }
}

/// Sentences × entities matrix of roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityRoleGrid {
    pub entities: Vec<String>,
    pub rows: Vec<Vec<Role>>,
}

impl EntityRoleGrid {
    pub fn new(entities: Vec<String>, rows: Vec<Vec<Role>>) -> Result<Self> {
        let g = EntityRoleGrid { entities, rows };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != self.entities.len() {
                return Err(Error::Data(format!(
                    "entity grid row {i} has {} cells for {} entities",
                    r.len(),
                    self.entities.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    fn column(&self, e: usize) -> impl Iterator<Item = Role> + '_ {
        self.rows.iter().map(move |r| r[e])
    }
}

/// Generative entity-grid model: role transitions within each entity's
/// column, conditioned on the previous `history` roles (padded with `-`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityGridModel {
    pub history: usize,
    pub alpha: f64,
    counts: BTreeMap<Vec<Role>, [u64; 4]>,
}

pub const DEFAULT_HISTORY: usize = 2;
pub const DEFAULT_ALPHA: f64 = 0.1;

fn contexts(column: &[Role], history: usize) -> impl Iterator<Item = (Vec<Role>, Role)> + '_ {
    (0..column.len()).map(move |i| {
        let ctx: Vec<Role> = (0..history)
            .map(|k| {
                let back = history - k;
                if i >= back {
                    column[i - back]
                } else {
                    Role::Absent
                }
            })
            .collect();
        (ctx, column[i])
    })
}

impl EntityGridModel {
    /// An untrained model: every context is uniform.
    pub fn empty(history: usize, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing alpha {alpha} must be finite and ≥ 0"
            )));
        }
        Ok(EntityGridModel {
            history,
            alpha,
            counts: BTreeMap::new(),
        })
    }

    pub fn train(grids: &[EntityRoleGrid], history: usize, alpha: f64) -> Result<Self> {
        let mut m = Self::empty(history, alpha)?;
        for g in grids {
            g.validate()?;
            for e in 0..g.num_entities() {
                let col: Vec<Role> = g.column(e).collect();
                for (ctx, r) in contexts(&col, history) {
                    m.counts.entry(ctx).or_insert([0; 4])[r.index()] += 1;
                }
            }
        }
        Ok(m)
    }

    /// `(count(ctx, role) + α) / (count(ctx) + 4α)`; a context never seen
    /// with `α = 0` is uniform.
    pub fn prob(&self, context: &[Role], role: Role) -> f64 {
        let c = self.counts.get(context).copied().unwrap_or([0; 4]);
        let total: u64 = c.iter().sum();
        let denom = total as f64 + 4.0 * self.alpha;
        if denom == 0.0 {
            return 0.25;
        }
        (c[role.index()] as f64 + self.alpha) / denom
    }

    pub fn transition_count(&self, context: &[Role], role: Role) -> u64 {
        self.counts.get(context).map_or(0, |c| c[role.index()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub ll: f64,
    pub avg_ll: f64,
}

/// Log-likelihood of every cell given its column history, and the same per
/// cell. An empty grid scores 0.
pub fn score_coherence(model: &EntityGridModel, grid: &EntityRoleGrid) -> Result<Coherence> {
    grid.validate()?;
    let mut ll = 0.0;
    for e in 0..grid.num_entities() {
        let col: Vec<Role> = grid.column(e).collect();
        for (ctx, r) in contexts(&col, model.history) {
            ll += model.prob(&ctx, r).ln();
        }
    }
    let cells = grid.num_rows() * grid.num_entities();
    let avg_ll = if cells == 0 { 0.0 } else { ll / cells as f64 };
    Ok(Coherence { ll, avg_ll })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Role::*;

    fn grid(rows: &[&str]) -> EntityRoleGrid {
        let rows: Vec<Vec<Role>> = rows
            .iter()
            .map(|r| r.chars().map(|c| c.to_string().parse().unwrap()).collect())
            .collect();
        let n = rows.first().map_or(0, |r| r.len());
        EntityRoleGrid::new((0..n).map(|i| format!("e{i}")).collect(), rows).unwrap()
    }

    #[test]
    fn uniform_and_degenerate() {
        let m = EntityGridModel::empty(2, 0.1).unwrap();
        for r in Role::ALL {
            assert_eq!(m.prob(&[Subject, Absent], r), 0.25);
        }
        let c = score_coherence(&m, &grid(&["S"])).unwrap();
        assert!((c.ll - 0.25f64.ln()).abs() < 1e-15);
        let all_s = grid(&["SS", "SS", "SS"]);
        let m = EntityGridModel::train(&[all_s], 0, 1e-9).unwrap();
        assert!(m.prob(&[], Subject) > 1.0 - 1e-9);
    }

    #[test]
    fn hand_tallied_bigram_model() {
        // columns: S O S and - S X
        let g = grid(&["S-", "OS", "SX"]);
        let m = EntityGridModel::train(&[g.clone()], 1, 0.5).unwrap();
        // context "-": S (col 0 start), - (col 1 start), S (after "-" in col 1)
        assert_eq!(m.transition_count(&[Absent], Subject), 2);
        assert_eq!(m.transition_count(&[Absent], Absent), 1);
        assert!((m.prob(&[Absent], Subject) - 2.5 / 5.0).abs() < 1e-15);
        assert!((m.prob(&[Absent], Object) - 0.5 / 5.0).abs() < 1e-15);
        // context "S": O, X
        assert!((m.prob(&[Subject], Object) - 1.5 / 4.0).abs() < 1e-15);
        assert!((m.prob(&[Object], Subject) - 1.5 / 3.0).abs() < 1e-15);
        let c = score_coherence(&m, &g).unwrap();
        assert!((c.avg_ll - c.ll / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ragged_grid_rejected() {
        let g = EntityRoleGrid {
            entities: vec!["a".into(), "b".into()],
            rows: vec![vec![Subject]],
        };
        assert!(g.validate().is_err());
        assert!("Q".parse::<Role>().is_err());
        assert_eq!("−".parse::<Role>().unwrap(), Absent);
    }
}
