//! Fragment classification: pure-kind layers, the BR (bounded reversal) and
//! BMA (bounded mode alternation) fragments, minimal Comp-height with a
//! verifiable decomposition witness, and the BR→ν rewrite.
//!
//! BR layers use a single direction (only X- or only Y-modalities, both
//! modes); BMA layers use a single mode (only global or only class
//! modalities, both directions). Zeroary modalities, propositions and
//! booleans belong to every layer.

use crate::formula::{Dir, Formula, Mode};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Br,
    Bma,
}

/// The pure set a layer draws its modalities from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    DirK(Dir),
    ModeK(Mode),
}

impl Basis {
    pub fn kinds(self) -> [LayerKind; 2] {
        match self {
            Basis::Br => [LayerKind::DirK(Dir::X), LayerKind::DirK(Dir::Y)],
            Basis::Bma => [LayerKind::ModeK(Mode::Global), LayerKind::ModeK(Mode::Class)],
        }
    }
    /// Which pure set a modality belongs to; weak (tilde) modalities inherit
    /// the kind of the underlying modality.
    pub fn kind_of(self, m: crate::formula::Mod1) -> LayerKind {
        match self {
            Basis::Br => LayerKind::DirK(m.dir),
            Basis::Bma => LayerKind::ModeK(m.mode),
        }
    }
}

/// One layer of a Comp decomposition: a skeleton pure in `kind`, whose hole
/// variables are filled by the child decompositions' formulas.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub kind: LayerKind,
    pub skeleton: Formula,
    pub children: Vec<(String, Decomposition)>,
}

impl Decomposition {
    pub fn height(&self) -> usize {
        1 + self.children.iter().map(|(_, c)| c.height()).max().unwrap_or(0)
    }

    /// Substitute the children back into the skeleton.
    pub fn recompose(&self) -> Formula {
        let mut f = self.skeleton.clone();
        for (hole, child) in &self.children {
            f = f.substitute(hole, &child.recompose());
        }
        f
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FragmentError {
    #[error("formula is not in the {0:?} fragment")]
    NotInFragment(Basis),
}

struct Ctx {
    basis: Basis,
    /// free variables of the whole formula; a subformula is "relatively
    /// closed" iff its free variables are among these (bound names are
    /// globally distinct after alpha normalization)
    global_free: BTreeSet<String>,
    hole_prefix: String,
    ctr: usize,
    memo: HashMap<Formula, Option<Decomposition>>,
}

impl Ctx {
    fn fresh_hole(&mut self) -> String {
        self.ctr += 1;
        format!("{}{}", self.hole_prefix, self.ctr)
    }

    fn closed(&self, f: &Formula) -> bool {
        f.free_vars().is_subset(&self.global_free)
    }

    /// Minimal-height decomposition of f, or None if outside the fragment.
    fn best(&mut self, f: &Formula) -> Option<Decomposition> {
        if let Some(d) = self.memo.get(f) {
            return d.clone();
        }
        let mut result: Option<Decomposition> = None;
        for kind in self.basis.kinds() {
            if let Some((skeleton, children)) = self.layer(f, kind, true) {
                let d = Decomposition { kind, skeleton, children };
                if result.as_ref().map_or(true, |r| d.height() < r.height()) {
                    result = Some(d);
                }
            }
        }
        self.memo.insert(f.clone(), result.clone());
        result
    }

    /// Try to realize f as a layer of the given kind: returns the skeleton
    /// (holes as fresh variables) and the child decompositions. `at_root`
    /// suppresses the degenerate cut of the whole layer into a single hole.
    fn layer(
        &mut self,
        f: &Formula,
        kind: LayerKind,
        at_root: bool,
    ) -> Option<(Formula, Vec<(String, Decomposition)>)> {
        use Formula::*;
        // structural option
        let structural: Option<(Formula, Vec<(String, Decomposition)>)> = match f {
            True | False | Prop(_) | NegProp(_) | Atom(_) | NegAtom(_) | Var(_) => {
                Some((f.clone(), vec![]))
            }
            And(a, b) | Or(a, b) => {
                let la = self.layer(a, kind, false);
                let lb = self.layer(b, kind, false);
                match (la, lb) {
                    (Some((sa, mut ca)), Some((sb, cb))) => {
                        ca.extend(cb);
                        let s = if matches!(f, And(..)) {
                            crate::formula::and(sa, sb)
                        } else {
                            crate::formula::or(sa, sb)
                        };
                        Some((s, ca))
                    }
                    _ => None,
                }
            }
            Mu(x, a) | Nu(x, a) => self.layer(a, kind, false).map(|(s, c)| {
                let s = if matches!(f, Mu(..)) {
                    Mu(x.clone(), Box::new(s))
                } else {
                    Nu(x.clone(), Box::new(s))
                };
                (s, c)
            }),
            Mod(m, a) | DualMod(m, a) => {
                if self.basis.kind_of(*m) == kind {
                    self.layer(a, kind, false).map(|(s, c)| {
                        let s = if matches!(f, Mod(..)) {
                            Mod(*m, Box::new(s))
                        } else {
                            DualMod(*m, Box::new(s))
                        };
                        (s, c)
                    })
                } else {
                    None
                }
            }
            // sugar must be expanded before classification
            _ => None,
        };
        // cut option: make f a child layer of its own
        let cut: Option<(Formula, Vec<(String, Decomposition)>)> =
            if !at_root && self.closed(f) {
                self.best(f).map(|d| {
                    let hole = self.fresh_hole();
                    (Var(hole.clone()), vec![(hole, d)])
                })
            } else {
                None
            };
        let maxh = |cs: &[(String, Decomposition)]| {
            cs.iter().map(|(_, d)| d.height()).max().unwrap_or(0)
        };
        match (structural, cut) {
            (Some(s), Some(c)) => Some(if maxh(&s.1) <= maxh(&c.1) { s } else { c }),
            (s, c) => s.or(c),
        }
    }
}

/// Minimal Comp-height of φ over the basis, with a decomposition witness;
/// None if φ is outside the fragment. Sugar other than the weak modalities is
/// expanded first (weak modalities classify by their underlying modality).
pub fn comp_height(phi: &Formula, basis: Basis) -> Option<(usize, Decomposition)> {
    let phi = phi.desugar_keep_tilde();
    let mut taken = BTreeSet::new();
    collect_names(&phi, &mut taken);
    let mut hole_prefix = "h".to_string();
    while taken.iter().any(|n| n.starts_with(&hole_prefix)) {
        hole_prefix.push('h');
    }
    let mut ctx = Ctx {
        basis,
        global_free: phi.free_vars(),
        hole_prefix,
        ctr: 0,
        memo: HashMap::new(),
    };
    ctx.best(&phi).map(|d| (d.height(), d))
}

fn collect_names(f: &Formula, out: &mut BTreeSet<String>) {
    use Formula::*;
    match f {
        Var(x) => {
            out.insert(x.clone());
        }
        Prop(p) | NegProp(p) => {
            out.insert(p.clone());
        }
        Mu(x, a) | Nu(x, a) => {
            out.insert(x.clone());
            collect_names(a, out);
        }
        _ => {
            for c in f.children() {
                collect_names(c, out);
            }
        }
    }
}

/// Check all decomposition invariants against φ: pure skeletons of the
/// basis's kinds, children closed relative to the skeleton binders (no
/// capture), and recomposition alpha-equal to φ (after expanding sugar the
/// same way comp_height does).
pub fn verify_decomposition(phi: &Formula, d: &Decomposition, basis: Basis) -> bool {
    let phi = phi.desugar_keep_tilde();
    verify_rec(d, basis) && alpha_eq(&d.recompose(), &phi)
}

fn verify_rec(d: &Decomposition, basis: Basis) -> bool {
    if !basis.kinds().contains(&d.kind) {
        return false;
    }
    if !pure_in(&d.skeleton, d.kind, basis) {
        return false;
    }
    for (hole, child) in &d.children {
        if !verify_rec(child, basis) {
            return false;
        }
        // the substitution condition: no skeleton binder may capture a free
        // variable of the child
        let child_free = child.recompose().free_vars();
        if captures(&d.skeleton, hole, &child_free, &mut Vec::new()) {
            return false;
        }
    }
    true
}

fn pure_in(f: &Formula, kind: LayerKind, basis: Basis) -> bool {
    use Formula::*;
    match f {
        Mod(m, a) | DualMod(m, a) => basis.kind_of(*m) == kind && pure_in(a, kind, basis),
        Until(..) | Since(..) | Fut(..) | Glob(..) | Past(..) | Hist(..) => false,
        _ => f.children().iter().all(|c| pure_in(c, kind, basis)),
    }
}

// Does any occurrence of `hole` in `f` sit under a binder whose variable is
// free in the child?
fn captures(f: &Formula, hole: &str, child_free: &BTreeSet<String>, scope: &mut Vec<String>) -> bool {
    use Formula::*;
    match f {
        Var(x) if x == hole => scope.iter().any(|v| child_free.contains(v)),
        Mu(x, a) | Nu(x, a) => {
            scope.push(x.clone());
            let r = captures(a, hole, child_free, scope);
            scope.pop();
            r
        }
        _ => f.children().iter().any(|c| captures(c, hole, child_free, scope)),
    }
}

/// Alpha-equivalence by canonical renaming of binders in traversal order.
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    fn canon(f: &Formula, ren: &mut Vec<(String, String)>, ctr: &mut usize) -> Formula {
        use Formula::*;
        match f {
            Var(x) => {
                let nx = ren
                    .iter()
                    .rev()
                    .find(|(o, _)| o == x)
                    .map(|(_, n)| n.clone())
                    .unwrap_or_else(|| x.clone());
                Var(nx)
            }
            Mu(x, body) | Nu(x, body) => {
                *ctr += 1;
                let nx = format!("#{ctr}");
                ren.push((x.clone(), nx.clone()));
                let nb = canon(body, ren, ctr);
                ren.pop();
                if matches!(f, Mu(..)) {
                    Mu(nx, Box::new(nb))
                } else {
                    Nu(nx, Box::new(nb))
                }
            }
            other => other.clone().map_children(|c| canon(&c, ren, ctr)),
        }
    }
    canon(a, &mut Vec::new(), &mut 0) == canon(b, &mut Vec::new(), &mut 0)
}

/// Is the (desugared) formula free of μ binders?
pub fn is_nu_only(phi: &Formula) -> bool {
    use Formula::*;
    let phi = phi.desugar();
    fn no_mu(f: &Formula) -> bool {
        !matches!(f, Mu(..)) && f.children().iter().all(|c| no_mu(c))
    }
    no_mu(&phi)
}

/// Is the (desugared) formula free of ν binders?
pub fn is_mu_only(phi: &Formula) -> bool {
    use Formula::*;
    let phi = phi.desugar();
    fn no_nu(f: &Formula) -> bool {
        !matches!(f, Nu(..)) && f.children().iter().all(|c| no_nu(c))
    }
    no_nu(&phi)
}

/// Rewrite a BR formula into an equivalent ν-only formula: per layer, guard
/// the skeleton and swap every μ for ν (single-direction guarded fixpoints
/// are unique).
pub fn br_to_nu(phi: &Formula) -> Result<Formula, FragmentError> {
    let (_, d) = comp_height(phi, Basis::Br).ok_or(FragmentError::NotInFragment(Basis::Br))?;
    Ok(nu_layers(&d).alpha_normalize())
}

fn nu_layers(d: &Decomposition) -> Formula {
    let skeleton = swap_mu_to_nu(&d.skeleton.to_guarded());
    let mut f = skeleton;
    for (hole, child) in &d.children {
        f = f.substitute(hole, &nu_layers(child));
    }
    f
}

pub fn swap_mu_to_nu(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        Mu(x, a) => Nu(x.clone(), Box::new(swap_mu_to_nu(a))),
        other => other.clone().map_children(|c| swap_mu_to_nu(&c)),
    }
}

/// Rewrite a BMA formula into an equivalent BR formula: each pure-mode layer
/// is compiled to its marking transducer and re-expressed as a disjunction of
/// (Y-only reachability) ∧ (letter test) ∧ (X-only co-reachability) formulas,
/// one per transition that outputs "true". The result has BR height at most
/// one more than the BMA height.
pub fn bma_to_br(phi: &Formula) -> Result<Formula, FragmentError> {
    let (_, d) =
        comp_height(phi, Basis::Bma).ok_or(FragmentError::NotInFragment(Basis::Bma))?;
    Ok(br_layers(&d).alpha_normalize())
}

fn br_layers(d: &Decomposition) -> Formula {
    use crate::formula::Atom0;
    use crate::wordautomata::{marking_transducer, transducer_to_formulas, LayerAlphabet};
    let children: std::collections::BTreeMap<String, Formula> =
        d.children.iter().map(|(n, c)| (n.clone(), br_layers(c))).collect();
    let mode = match d.kind {
        LayerKind::ModeK(m) => m,
        LayerKind::DirK(_) => unreachable!("BMA decompositions use mode layers"),
    };
    let letters: Vec<String> = d.skeleton.props().into_iter().collect();
    let mut preds: Vec<String> = children.keys().cloned().collect();
    // only atoms the skeleton mentions that are data predicates for its mode
    let foreign = match mode {
        Mode::Global => ["S", "P", "firstc", "lastc"],
        Mode::Class => ["S", "P", "firstg", "lastg"],
    };
    fn atoms(f: &Formula, out: &mut std::collections::BTreeSet<&'static str>) {
        match f {
            Formula::Atom(a) | Formula::NegAtom(a) => {
                out.insert(a.name());
            }
            _ => {
                for c in f.children() {
                    atoms(c, out);
                }
            }
        }
    }
    let mut mentioned = std::collections::BTreeSet::new();
    atoms(&d.skeleton, &mut mentioned);
    preds.extend(
        foreign.iter().filter(|a| mentioned.contains(**a)).map(|a| a.to_string()),
    );
    let alpha = LayerAlphabet { mode, letters, preds };
    let t = marking_transducer(&d.skeleton, &alpha)
        .expect("a verified pure-mode layer compiles");
    let pred_formula = |p: &str| match p {
        "S" => Formula::Atom(Atom0::S),
        "P" => Formula::Atom(Atom0::P),
        "firstg" => Formula::Atom(Atom0::FirstG),
        "lastg" => Formula::Atom(Atom0::LastG),
        "firstc" => Formula::Atom(Atom0::FirstC),
        "lastc" => Formula::Atom(Atom0::LastC),
        hole => children[hole].clone(),
    };
    transducer_to_formulas(&t, &alpha, &pred_formula)
        .into_iter()
        .find(|(o, _)| *o)
        .map(|(_, f)| f)
        .unwrap_or(Formula::False)
}
