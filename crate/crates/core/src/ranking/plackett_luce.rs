use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" => Ok(Outcome::AWins),
            "b" => Ok(Outcome::BWins),
            "tie" => Ok(Outcome::Tie),
            other => Err(Error::Format(format!("outcome must be a, b or tie, got {other:?}"))),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::AWins => "a",
            Outcome::BWins => "b",
            Outcome::Tie => "tie",
        })
    }
}

/// One human judgement between two conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseComparison {
    pub item_a: String,
    pub item_b: String,
    pub outcome: Outcome,
}

impl PairwiseComparison {
    pub fn new(item_a: impl Into<String>, item_b: impl Into<String>, outcome: Outcome) -> Result<Self> {
        let (item_a, item_b) = (item_a.into(), item_b.into());
        if item_a == item_b {
            return Err(Error::Argument(format!("item compared with itself: {item_a}")));
        }
        Ok(Self { item_a, item_b, outcome })
    }

    /// Win credit `(a, b)`; a tie is half a win each.
    fn credit(&self) -> (f64, f64) {
        match self.outcome {
            Outcome::AWins => (1.0, 0.0),
            Outcome::BWins => (0.0, 1.0),
            Outcome::Tie => (0.5, 0.5),
        }
    }
}

/// Reads an `item_a,item_b,outcome` CSV with a header row.
pub fn read_comparisons(reader: impl std::io::Read) -> Result<Vec<PairwiseComparison>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["item_a", "item_b", "outcome"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Format(format!(
            "comparisons header must be item_a,item_b,outcome, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let outcome: Outcome = record[2].parse()?;
        let c = PairwiseComparison::new(&record[0], &record[1], outcome)
            .map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))?;
        out.push(c);
    }
    Ok(out)
}

pub fn load_comparisons(path: impl AsRef<Path>) -> Result<Vec<PairwiseComparison>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_comparisons(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// Stopped at the iteration limit before reaching the tolerance.
    MaxIterations,
    /// The comparison graph is not strongly connected. Worths are fitted
    /// and anchored per component and are not comparable across components.
    Partial,
}

/// Log-worths anchored so the best condition (per component) is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WorthVector {
    worths: BTreeMap<String, f64>,
    components: BTreeMap<String, usize>,
    component_count: usize,
    status: FitStatus,
    iterations: usize,
}

impl WorthVector {
    pub fn get(&self, item: &str) -> Option<f64> {
        self.worths.get(item).copied()
    }

    pub fn worths(&self) -> &BTreeMap<String, f64> {
        &self.worths
    }

    pub fn len(&self) -> usize {
        self.worths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worths.is_empty()
    }

    pub fn status(&self) -> FitStatus {
        self.status
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    pub fn component_of(&self, item: &str) -> Option<usize> {
        self.components.get(item).copied()
    }

    /// Items from best to worst; equal worths are ordered by name.
    pub fn ranking(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.worths.iter().map(|(k, &w)| (k.as_str(), w)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

/// Bradley-Terry maximum likelihood worths by minorization-maximization,
/// starting from uniform worths.
pub fn fit_plackett_luce(comparisons: &[PairwiseComparison], max_iters: usize, tol: f64) -> Result<WorthVector> {
    fit(comparisons, max_iters, tol, None)
}

/// As [`fit_plackett_luce`] but from seeded random initial worths.
pub fn fit_plackett_luce_from_random_start(
    comparisons: &[PairwiseComparison],
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<WorthVector> {
    fit(comparisons, max_iters, tol, Some(seed))
}

fn fit(comparisons: &[PairwiseComparison], max_iters: usize, tol: f64, init: Option<u64>) -> Result<WorthVector> {
    if comparisons.is_empty() {
        return Err(Error::NoData("no pairwise comparisons".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::Argument("max_iters must be at least 1".into()));
    }
    let names: Vec<&str> = comparisons
        .iter()
        .flat_map(|c| [c.item_a.as_str(), c.item_b.as_str()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();

    // Edge winner -> loser; a tie points both ways.
    let mut graph = DiGraph::<usize, ()>::with_capacity(names.len(), comparisons.len());
    let nodes: Vec<_> = (0..names.len()).map(|i| graph.add_node(i)).collect();
    for c in comparisons {
        let (a, b) = (index[c.item_a.as_str()], index[c.item_b.as_str()]);
        let (ca, cb) = c.credit();
        if ca > 0.0 {
            graph.update_edge(nodes[a], nodes[b], ());
        }
        if cb > 0.0 {
            graph.update_edge(nodes[b], nodes[a], ());
        }
    }
    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| graph[n]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    sccs.sort();

    let mut component = vec![0usize; names.len()];
    for (k, members) in sccs.iter().enumerate() {
        for &i in members {
            component[i] = k;
        }
    }

    let mut rng = init.map(ChaCha8Rng::seed_from_u64);
    let mut log_worth = vec![0.0; names.len()];
    let mut converged = true;
    let mut iterations = 0;
    for members in &sccs {
        if members.len() < 2 {
            continue;
        }
        let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let mut wins = vec![0.0; members.len()];
        let mut pair_counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for c in comparisons {
            let (a, b) = (index[c.item_a.as_str()], index[c.item_b.as_str()]);
            let (Some(&la), Some(&lb)) = (local.get(&a), local.get(&b)) else {
                continue;
            };
            let (ca, cb) = c.credit();
            wins[la] += ca;
            wins[lb] += cb;
            *pair_counts.entry((la.min(lb), la.max(lb))).or_default() += 1.0;
        }
        let pairs: Vec<(usize, usize, f64)> = pair_counts.into_iter().map(|((i, j), n)| (i, j, n)).collect();
        let start: Vec<f64> = match rng.as_mut() {
            Some(r) => (0..members.len()).map(|_| r.random_range(0.1..10.0)).collect(),
            None => vec![1.0; members.len()],
        };
        let (gamma, iters, ok) = mm(&wins, &pairs, start, max_iters, tol);
        iterations = iterations.max(iters);
        converged &= ok;
        for (l, &g) in members.iter().enumerate() {
            log_worth[g] = gamma[l].ln();
        }
    }

    let status = if sccs.len() > 1 {
        FitStatus::Partial
    } else if converged {
        FitStatus::Converged
    } else {
        FitStatus::MaxIterations
    };
    Ok(WorthVector {
        worths: names.iter().map(|n| (n.to_string(), log_worth[index[n]])).collect(),
        components: names.iter().map(|n| (n.to_string(), component[index[n]])).collect(),
        component_count: sccs.len(),
        status,
        iterations,
    })
}

/// Simultaneous MM updates `g_i <- W_i / sum_j n_ij / (g_i + g_j)`, rescaled
/// so the largest worth is 1 after each sweep.
fn mm(wins: &[f64], pairs: &[(usize, usize, f64)], mut gamma: Vec<f64>, max_iters: usize, tol: f64) -> (Vec<f64>, usize, bool) {
    rescale(&mut gamma);
    let mut denom = vec![0.0; gamma.len()];
    for iter in 1..=max_iters {
        denom.iter_mut().for_each(|d| *d = 0.0);
        for &(i, j, n) in pairs {
            let t = n / (gamma[i] + gamma[j]);
            denom[i] += t;
            denom[j] += t;
        }
        let mut next: Vec<f64> = wins.iter().zip(&denom).map(|(w, d)| w / d).collect();
        rescale(&mut next);
        let change = next
            .iter()
            .zip(&gamma)
            .map(|(a, b)| (a.ln() - b.ln()).abs())
            .fold(0.0, f64::max);
        gamma = next;
        if change < tol {
            return (gamma, iter, true);
        }
    }
    (gamma, max_iters, false)
}

fn rescale(gamma: &mut [f64]) {
    let top = gamma.iter().copied().fold(f64::MIN, f64::max);
    gamma.iter_mut().for_each(|g| *g /= top);
}

/// Bradley-Terry log-likelihood of the comparisons under fitted worths.
pub fn log_likelihood(comparisons: &[PairwiseComparison], worths: &WorthVector) -> f64 {
    comparisons
        .iter()
        .map(|c| {
            let (a, b) = (worths.get(&c.item_a).unwrap_or(0.0), worths.get(&c.item_b).unwrap_or(0.0));
            let (ca, cb) = c.credit();
            let lse = log_sum_exp(a, b);
            ca * (a - lse) + cb * (b - lse)
        })
        .sum()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
