//! μ-calculus formula AST: parsing, printing, substitution, dualization,
//! sugar expansion, guardedness transformation and Bekić linearization.
//!
//! Core grammar: negation only on atoms; four unary modalities `Xg Xc Yg Yc`
//! and their "weak" duals `~Xg ~Xc ~Yg ~Yc`; zeroary modalities
//! `S P firstg firstc lastg lastc`; μ/ν binders. Temporal sugar
//! (`Ug Uc Sg Sc Fg Fc Gg Gc Pg Pc Hg Hc`) is kept in the AST until
//! [`desugar`](Formula::desugar).

use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Mode of a modality: ordinary word order or within-class order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Mode {
    Global,
    Class,
}

/// Direction of a modality: towards the future (X) or the past (Y).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    X,
    Y,
}

/// One of the four unary modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mod1 {
    pub dir: Dir,
    pub mode: Mode,
}

pub const XG: Mod1 = Mod1 { dir: Dir::X, mode: Mode::Global };
pub const XC: Mod1 = Mod1 { dir: Dir::X, mode: Mode::Class };
pub const YG: Mod1 = Mod1 { dir: Dir::Y, mode: Mode::Global };
pub const YC: Mod1 = Mod1 { dir: Dir::Y, mode: Mode::Class };

impl Mod1 {
    pub fn name(self) -> &'static str {
        match (self.dir, self.mode) {
            (Dir::X, Mode::Global) => "Xg",
            (Dir::X, Mode::Class) => "Xc",
            (Dir::Y, Mode::Global) => "Yg",
            (Dir::Y, Mode::Class) => "Yc",
        }
    }
    /// The zeroary modality that holds exactly where this modality has no
    /// target position (e.g. `lastg` for `Xg`).
    pub fn boundary(self) -> Atom0 {
        match (self.dir, self.mode) {
            (Dir::X, Mode::Global) => Atom0::LastG,
            (Dir::X, Mode::Class) => Atom0::LastC,
            (Dir::Y, Mode::Global) => Atom0::FirstG,
            (Dir::Y, Mode::Class) => Atom0::FirstC,
        }
    }
}

/// Zeroary modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom0 {
    S,
    P,
    FirstG,
    FirstC,
    LastG,
    LastC,
}

impl Atom0 {
    pub fn name(self) -> &'static str {
        match self {
            Atom0::S => "S",
            Atom0::P => "P",
            Atom0::FirstG => "firstg",
            Atom0::FirstC => "firstc",
            Atom0::LastG => "lastg",
            Atom0::LastC => "lastc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    /// "the letter at this position is p"
    Prop(String),
    /// "the letter at this position is not p"
    NegProp(String),
    Atom(Atom0),
    NegAtom(Atom0),
    Var(String),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Mod(Mod1, Box<Formula>),
    /// Weak modality: `~Xg φ ≡ lastg ∨ Xg φ`, and so on.
    DualMod(Mod1, Box<Formula>),
    Mu(String, Box<Formula>),
    Nu(String, Box<Formula>),
    // ---- sugar, removed by desugar ----
    Until(Mode, Box<Formula>, Box<Formula>),
    Since(Mode, Box<Formula>, Box<Formula>),
    /// Reflexive eventually (in the given mode's future order).
    Fut(Mode, Box<Formula>),
    /// Reflexive always-in-future.
    Glob(Mode, Box<Formula>),
    /// Reflexive eventually-in-past.
    Past(Mode, Box<Formula>),
    /// Reflexive always-in-past.
    Hist(Mode, Box<Formula>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("formula has free fixpoint variables: {0:?}")]
    FreeVars(Vec<String>),
    #[error("unknown vectorial component {0:?}")]
    UnknownComponent(String),
}

use Formula::*;

// small constructors to keep the rest of the crate readable
pub fn and(a: Formula, b: Formula) -> Formula {
    And(Box::new(a), Box::new(b))
}
pub fn or(a: Formula, b: Formula) -> Formula {
    Or(Box::new(a), Box::new(b))
}
pub fn md(m: Mod1, a: Formula) -> Formula {
    Mod(m, Box::new(a))
}
pub fn wmd(m: Mod1, a: Formula) -> Formula {
    DualMod(m, Box::new(a))
}
pub fn mu(x: &str, a: Formula) -> Formula {
    Mu(x.to_string(), Box::new(a))
}
pub fn nu(x: &str, a: Formula) -> Formula {
    Nu(x.to_string(), Box::new(a))
}
pub fn prop(p: &str) -> Formula {
    Prop(p.to_string())
}
pub fn var(x: &str) -> Formula {
    Var(x.to_string())
}
/// n-ary disjunction; empty = false.
pub fn big_or(mut fs: Vec<Formula>) -> Formula {
    match fs.len() {
        0 => False,
        1 => fs.pop().unwrap(),
        _ => {
            let last = fs.pop().unwrap();
            or(big_or(fs), last)
        }
    }
}
/// n-ary conjunction; empty = true.
pub fn big_and(mut fs: Vec<Formula>) -> Formula {
    match fs.len() {
        0 => True,
        1 => fs.pop().unwrap(),
        _ => {
            let last = fs.pop().unwrap();
            and(big_and(fs), last)
        }
    }
}

const RESERVED: &[&str] = &[
    "true", "false", "S", "P", "nS", "nP", "firstg", "firstc", "lastg", "lastc", "mu", "nu", "Xg",
    "Xc", "Yg", "Yc", "Fg", "Fc", "Gg", "Gc", "Pg", "Pc", "Hg", "Hc", "Ug", "Uc", "Sg", "Sc",
];

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Tilde(Mod1),
    Pipe,
    Amp,
    Bang,
    LParen,
    RParen,
    Dot,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '|' => {
                out.push((i, Tok::Pipe));
                i += 1;
            }
            '&' => {
                out.push((i, Tok::Amp));
                i += 1;
            }
            '!' => {
                out.push((i, Tok::Bang));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '.' => {
                out.push((i, Tok::Dot));
                i += 1;
            }
            '~' => {
                let start = i;
                i += 1;
                let mut id = String::new();
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    id.push(bytes[i]);
                    i += 1;
                }
                let m = match id.as_str() {
                    "Xg" => XG,
                    "Xc" => XC,
                    "Yg" => YG,
                    "Yc" => YC,
                    _ => {
                        return Err(FormulaError::Syntax {
                            pos: start,
                            msg: format!("'~' must be followed by Xg/Xc/Yg/Yc, got {id:?}"),
                        })
                    }
                };
                out.push((start, Tok::Tilde(m)));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                let mut id = String::new();
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    id.push(bytes[i]);
                    i += 1;
                }
                out.push((start, Tok::Ident(id)));
            }
            _ => {
                return Err(FormulaError::Syntax {
                    pos: i,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(_, t)| t)
    }
    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|(p, _)| *p).unwrap_or(usize::MAX)
    }
    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|(_, t)| t.clone());
        self.i += 1;
        t
    }
    fn err(&self, msg: &str) -> FormulaError {
        FormulaError::Syntax { pos: self.pos(), msg: msg.to_string() }
    }

    // lowest precedence: right-associative binary until/since sugar
    fn until(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.disj()?;
        if let Some(Tok::Ident(id)) = self.peek() {
            let ctor: Option<fn(Mode, Box<Formula>, Box<Formula>) -> Formula> = match id.as_str() {
                "Ug" | "Uc" => Some(Until),
                "Sg" | "Sc" => Some(Since),
                _ => None,
            };
            if let Some(ctor) = ctor {
                let mode = if id.ends_with('g') { Mode::Global } else { Mode::Class };
                self.bump();
                let rhs = self.until()?;
                return Ok(ctor(mode, Box::new(lhs), Box::new(rhs)));
            }
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Formula, FormulaError> {
        let mut f = self.conj()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            f = or(f, self.conj()?);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula, FormulaError> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            f = and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Some(Tok::Tilde(m)) => {
                let m = *m;
                self.bump();
                Ok(wmd(m, self.unary()?))
            }
            Some(Tok::Ident(id)) => {
                let id = id.clone();
                let un: Option<Formula> = match id.as_str() {
                    "Xg" | "Xc" | "Yg" | "Yc" | "Fg" | "Fc" | "Gg" | "Gc" | "Pg" | "Pc" | "Hg"
                    | "Hc" => {
                        self.bump();
                        let child = self.unary()?;
                        let mode =
                            if id.ends_with('g') { Mode::Global } else { Mode::Class };
                        Some(match &id[..1] {
                            "X" => md(Mod1 { dir: Dir::X, mode }, child),
                            "Y" => md(Mod1 { dir: Dir::Y, mode }, child),
                            "F" => Fut(mode, Box::new(child)),
                            "G" => Glob(mode, Box::new(child)),
                            "P" => Past(mode, Box::new(child)),
                            _ => Hist(mode, Box::new(child)),
                        })
                    }
                    "mu" | "nu" => {
                        let is_mu = id == "mu";
                        self.bump();
                        let x = match self.bump() {
                            Some(Tok::Ident(x)) if !RESERVED.contains(&x.as_str()) => x,
                            _ => return Err(self.err("expected variable name after mu/nu")),
                        };
                        if self.bump() != Some(Tok::Dot) {
                            return Err(self.err("expected '.' after binder variable"));
                        }
                        // binder body extends as far right as possible
                        let body = self.until()?;
                        Some(if is_mu { mu(&x, body) } else { nu(&x, body) })
                    }
                    _ => None,
                };
                match un {
                    Some(f) => Ok(f),
                    None => self.atom(),
                }
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, FormulaError> {
        match self.bump() {
            Some(Tok::Bang) => match self.atom()? {
                Prop(p) => Ok(NegProp(p)),
                NegProp(p) => Ok(Prop(p)),
                Atom(a) => Ok(NegAtom(a)),
                NegAtom(a) => Ok(Atom(a)),
                True => Ok(False),
                False => Ok(True),
                // identifiers under '!' always denote letter propositions
                Var(p) => Ok(NegProp(p)),
                _ => Err(self.err("'!' applies to atoms only")),
            },
            Some(Tok::LParen) => {
                let f = self.until()?;
                if self.bump() != Some(Tok::RParen) {
                    return Err(self.err("expected ')'"));
                }
                Ok(f)
            }
            Some(Tok::Ident(id)) => match id.as_str() {
                "true" => Ok(True),
                "false" => Ok(False),
                "S" => Ok(Atom(Atom0::S)),
                "P" => Ok(Atom(Atom0::P)),
                "nS" => Ok(NegAtom(Atom0::S)),
                "nP" => Ok(NegAtom(Atom0::P)),
                "firstg" => Ok(Atom(Atom0::FirstG)),
                "firstc" => Ok(Atom(Atom0::FirstC)),
                "lastg" => Ok(Atom(Atom0::LastG)),
                "lastc" => Ok(Atom(Atom0::LastC)),
                w if RESERVED.contains(&w) => {
                    Err(self.err(&format!("reserved word {w:?} used as atom")))
                }
                // identifier: fixpoint variable if bound, letter proposition
                // otherwise — resolved in a later pass
                _ => Ok(Var(id)),
            },
            _ => Err(self.err("expected a formula")),
        }
    }
}

impl Formula {
    /// Parse concrete syntax. Identifiers not bound by a μ/ν in scope become
    /// letter propositions; bound variables are alpha-renamed apart.
    pub fn parse(text: &str) -> Result<Formula, FormulaError> {
        let toks = tokenize(text)?;
        let mut p = Parser { toks, i: 0 };
        let f = p.until()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        Ok(f.resolve_idents(&mut Vec::new()).alpha_normalize())
    }

    // Turn Var(id) into Prop(id) when id is not bound by an enclosing binder.
    fn resolve_idents(self, scope: &mut Vec<String>) -> Formula {
        match self {
            Var(x) => {
                if scope.contains(&x) {
                    Var(x)
                } else {
                    Prop(x)
                }
            }
            Mu(x, b) => {
                scope.push(x.clone());
                let b = b.resolve_idents(scope);
                scope.pop();
                Mu(x, Box::new(b))
            }
            Nu(x, b) => {
                scope.push(x.clone());
                let b = b.resolve_idents(scope);
                scope.pop();
                Nu(x, Box::new(b))
            }
            other => other.map_children(|c| c.resolve_idents(scope)),
        }
    }

    /// Apply f to each direct child, rebuilding the node.
    pub fn map_children(self, mut f: impl FnMut(Formula) -> Formula) -> Formula {
        match self {
            And(a, b) => And(Box::new(f(*a)), Box::new(f(*b))),
            Or(a, b) => Or(Box::new(f(*a)), Box::new(f(*b))),
            Mod(m, a) => Mod(m, Box::new(f(*a))),
            DualMod(m, a) => DualMod(m, Box::new(f(*a))),
            Mu(x, a) => Mu(x, Box::new(f(*a))),
            Nu(x, a) => Nu(x, Box::new(f(*a))),
            Until(m, a, b) => Until(m, Box::new(f(*a)), Box::new(f(*b))),
            Since(m, a, b) => Since(m, Box::new(f(*a)), Box::new(f(*b))),
            Fut(m, a) => Fut(m, Box::new(f(*a))),
            Glob(m, a) => Glob(m, Box::new(f(*a))),
            Past(m, a) => Past(m, Box::new(f(*a))),
            Hist(m, a) => Hist(m, Box::new(f(*a))),
            leaf => leaf,
        }
    }

    /// Immutable visit of direct children.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            And(a, b) | Or(a, b) | Until(_, a, b) | Since(_, a, b) => vec![a, b],
            Mod(_, a) | DualMod(_, a) | Mu(_, a) | Nu(_, a) | Fut(_, a) | Glob(_, a)
            | Past(_, a) | Hist(_, a) => vec![a],
            _ => vec![],
        }
    }

    /// Free fixpoint variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Var(x) => [x.clone()].into(),
            Mu(x, a) | Nu(x, a) => {
                let mut s = a.free_vars();
                s.remove(x);
                s
            }
            _ => self.children().iter().flat_map(|c| c.free_vars()).collect(),
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// All identifiers occurring anywhere (props, free and bound variables).
    fn all_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Var(x) => {
                out.insert(x.clone());
            }
            Prop(p) | NegProp(p) => {
                out.insert(p.clone());
            }
            Mu(x, a) | Nu(x, a) => {
                out.insert(x.clone());
                a.all_names(out);
            }
            _ => {
                for c in self.children() {
                    c.all_names(out);
                }
            }
        }
    }

    /// Letter propositions mentioned (positively or negatively).
    pub fn props(&self) -> BTreeSet<String> {
        match self {
            Prop(p) | NegProp(p) => [p.clone()].into(),
            _ => self.children().iter().flat_map(|c| c.props()).collect(),
        }
    }

    /// Rename bound variables so that all binders use pairwise-distinct names
    /// that also differ from every proposition and free variable.
    pub fn alpha_normalize(&self) -> Formula {
        fn go(
            f: &Formula,
            ren: &mut Vec<(String, String)>,
            used: &mut BTreeSet<String>,
        ) -> Formula {
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
                Mu(x, a) | Nu(x, a) => {
                    let fresh = fresh_name(x, used);
                    used.insert(fresh.clone());
                    ren.push((x.clone(), fresh.clone()));
                    let body = go(a, ren, used);
                    ren.pop();
                    match f {
                        Mu(..) => Mu(fresh, Box::new(body)),
                        _ => Nu(fresh, Box::new(body)),
                    }
                }
                other => other.clone().map_children(|c| go(&c, ren, used)),
            }
        }
        // binder names must avoid free variables, propositions and each
        // other; seeding with props and free vars lets unique binders keep
        // their spelling
        let mut used: BTreeSet<String> = self.free_vars();
        used.extend(self.props());
        go(self, &mut Vec::new(), &mut used)
    }

    /// Capture-avoiding substitution of `repl` for free occurrences of `x`.
    pub fn substitute(&self, x: &str, repl: &Formula) -> Formula {
        let repl_free = repl.free_vars();
        fn go(f: &Formula, x: &str, repl: &Formula, avoid: &BTreeSet<String>) -> Formula {
            match f {
                Var(y) if y == x => repl.clone(),
                Var(_) => f.clone(),
                Mu(y, a) | Nu(y, a) => {
                    let is_mu = matches!(f, Mu(..));
                    if y == x {
                        return f.clone();
                    }
                    let (y2, body) = if avoid.contains(y) {
                        // rename this binder away from repl's free variables
                        let mut used: BTreeSet<String> = avoid.clone();
                        a.all_names(&mut used);
                        used.insert(x.to_string());
                        let fresh = fresh_name(y, &used);
                        (fresh.clone(), a.substitute(y, &Var(fresh)))
                    } else {
                        (y.clone(), (**a).clone())
                    };
                    let body = go(&body, x, repl, avoid);
                    if is_mu {
                        Mu(y2, Box::new(body))
                    } else {
                        Nu(y2, Box::new(body))
                    }
                }
                other => other.clone().map_children(|c| go(&c, x, repl, avoid)),
            }
        }
        go(self, x, repl, &repl_free)
    }

    // -----------------------------------------------------------------------
    // Sugar expansion
    // -----------------------------------------------------------------------

    /// Expand temporal sugar into the core grammar. `keep_tilde` retains the
    /// weak modalities as `DualMod` nodes; otherwise they become
    /// `boundary ∨ Mod` disjunctions.
    fn expand(&self, keep_tilde: bool, ctr: &mut usize) -> Formula {
        // plain identifiers; alpha_normalize afterwards resolves any clash
        // with user-written names
        let fresh = |ctr: &mut usize| {
            *ctr += 1;
            format!("v{ctr}")
        };
        let x_of = |mode: Mode| Mod1 { dir: Dir::X, mode };
        let y_of = |mode: Mode| Mod1 { dir: Dir::Y, mode };
        match self {
            Until(m, a, b) => {
                let (a, b) = (a.expand(keep_tilde, ctr), b.expand(keep_tilde, ctr));
                let v = fresh(ctr);
                mu(&v, or(b, and(a, md(x_of(*m), Var(v.clone())))))
            }
            Since(m, a, b) => {
                let (a, b) = (a.expand(keep_tilde, ctr), b.expand(keep_tilde, ctr));
                let v = fresh(ctr);
                mu(&v, or(b, and(a, md(y_of(*m), Var(v.clone())))))
            }
            Fut(m, a) => {
                let a = a.expand(keep_tilde, ctr);
                let v = fresh(ctr);
                mu(&v, or(a, md(x_of(*m), Var(v.clone()))))
            }
            Past(m, a) => {
                let a = a.expand(keep_tilde, ctr);
                let v = fresh(ctr);
                mu(&v, or(a, md(y_of(*m), Var(v.clone()))))
            }
            Glob(m, a) => {
                let a = a.expand(keep_tilde, ctr);
                let v = fresh(ctr);
                let step = wmd(x_of(*m), Var(v.clone()));
                let step = if keep_tilde { step } else { step.expand(false, ctr) };
                nu(&v, and(a, step))
            }
            Hist(m, a) => {
                let a = a.expand(keep_tilde, ctr);
                let v = fresh(ctr);
                let step = wmd(y_of(*m), Var(v.clone()));
                let step = if keep_tilde { step } else { step.expand(false, ctr) };
                nu(&v, and(a, step))
            }
            DualMod(m, a) => {
                let a = a.expand(keep_tilde, ctr);
                if keep_tilde {
                    wmd(*m, a)
                } else {
                    or(Atom(m.boundary()), md(*m, a))
                }
            }
            other => other.clone().map_children(|c| c.expand(keep_tilde, ctr)),
        }
    }

    /// Full expansion into the §-core grammar (no sugar, no weak modalities).
    pub fn desugar(&self) -> Formula {
        let mut ctr = 0;
        self.expand(false, &mut ctr).alpha_normalize()
    }

    /// Expansion that keeps weak modalities as AST nodes (used by the
    /// fragment classifier, which assigns them their underlying mode).
    pub fn desugar_keep_tilde(&self) -> Formula {
        let mut ctr = 0;
        self.expand(true, &mut ctr).alpha_normalize()
    }

    // -----------------------------------------------------------------------
    // Dualization
    // -----------------------------------------------------------------------

    /// Semantic negation of a sentence, in negation-normal form.
    pub fn dualize(&self) -> Result<Formula, FormulaError> {
        let fv = self.free_vars();
        if !fv.is_empty() {
            return Err(FormulaError::FreeVars(fv.into_iter().collect()));
        }
        let mut ctr = 0;
        Ok(self.expand(true, &mut ctr).dual().alpha_normalize())
    }

    // Syntactic dual; bound variables are left alone (the binder swap takes
    // care of them).
    fn dual(&self) -> Formula {
        match self {
            True => False,
            False => True,
            Prop(p) => NegProp(p.clone()),
            NegProp(p) => Prop(p.clone()),
            Atom(a) => NegAtom(*a),
            NegAtom(a) => Atom(*a),
            Var(x) => Var(x.clone()),
            And(a, b) => or(a.dual(), b.dual()),
            Or(a, b) => and(a.dual(), b.dual()),
            Mod(m, a) => wmd(*m, a.dual()),
            DualMod(m, a) => md(*m, a.dual()),
            Mu(x, a) => Nu(x.clone(), Box::new(a.dual())),
            Nu(x, a) => Mu(x.clone(), Box::new(a.dual())),
            sugar => sugar.clone().map_children(|_| unreachable!()),
        }
    }

    // -----------------------------------------------------------------------
    // Guardedness
    // -----------------------------------------------------------------------

    /// Does every binder's variable occur only under at least one modality
    /// within its body? Sugar nodes (whose expansions are guarded) count as
    /// guarding occurrences of variables inside their scope, except that a
    /// binder with an unguarded variable is unguarded regardless.
    pub fn is_guarded(&self) -> bool {
        fn unguarded_occurs(f: &Formula, x: &str) -> bool {
            match f {
                Var(y) => y == x,
                And(a, b) | Or(a, b) => unguarded_occurs(a, x) || unguarded_occurs(b, x),
                Mod(..) | DualMod(..) => false,
                Mu(y, a) | Nu(y, a) => y != x && unguarded_occurs(a, x),
                // sugar expansions evaluate both operands at the current
                // position, so occurrences there stay unguarded
                Until(_, a, b) | Since(_, a, b) => {
                    unguarded_occurs(a, x) || unguarded_occurs(b, x)
                }
                Fut(_, a) | Glob(_, a) | Past(_, a) | Hist(_, a) => unguarded_occurs(a, x),
                _ => false,
            }
        }
        match self {
            Mu(x, a) | Nu(x, a) => !unguarded_occurs(a, x) && a.is_guarded(),
            _ => self.children().iter().all(|c| c.is_guarded()),
        }
    }

    /// Rewrite into an equivalent guarded formula. Works on the desugared
    /// core (sugar is expanded first).
    pub fn to_guarded(&self) -> Formula {
        let mut ctr = 0;
        let f = self.expand(true, &mut ctr).alpha_normalize();
        f.guard().alpha_normalize().simplify()
    }

    fn guard(&self) -> Formula {
        match self {
            Mu(x, a) | Nu(x, a) => {
                let is_mu = matches!(self, Mu(..));
                let body = a.guard();
                let body = expose_unguarded(body, x);
                // CNF over literals = non-∧/∨ subformulas (all of which now
                // contain x only guarded) plus the variable x itself
                let clauses = cnf(&body, x);
                let mut alpha: Vec<Formula> = Vec::new(); // from clauses containing x
                let mut beta: Vec<Formula> = Vec::new(); // x-free clauses
                let mut any_x = false;
                for (has_x, lits) in clauses {
                    let c = big_or(lits);
                    if has_x {
                        any_x = true;
                        alpha.push(c);
                    } else {
                        beta.push(c);
                    }
                }
                if !any_x {
                    if is_mu {
                        Mu(x.clone(), Box::new(big_and(beta)))
                    } else {
                        Nu(x.clone(), Box::new(big_and(beta)))
                    }
                } else if is_mu {
                    // μx.(x∨α)∧β ≡ μx.α∧β
                    let mut all = alpha;
                    all.extend(beta);
                    Mu(x.clone(), Box::new(big_and(all)))
                } else {
                    // νx.(x∨α)∧β ≡ νx.β
                    Nu(x.clone(), Box::new(big_and(beta)))
                }
            }
            other => other.clone().map_children(|c| c.guard()),
        }
    }

    /// Light boolean simplification (true/false units); keeps structure
    /// otherwise.
    pub fn simplify(&self) -> Formula {
        match self.clone().map_children(|c| c.simplify()) {
            And(a, b) => match (*a, *b) {
                (True, f) | (f, True) => f,
                (False, _) | (_, False) => False,
                (a, b) => and(a, b),
            },
            Or(a, b) => match (*a, *b) {
                (False, f) | (f, False) => f,
                (True, _) | (_, True) => True,
                (a, b) => or(a, b),
            },
            Mu(x, a) => match *a {
                False => False,
                True => True,
                a => Mu(x, Box::new(a)),
            },
            Nu(x, a) => match *a {
                False => False,
                True => True,
                a => Nu(x, Box::new(a)),
            },
            other => other,
        }
    }
}

/// Pick a name based on `base` not present in `used`.
pub fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    if !used.contains(base) && !RESERVED.contains(&base) {
        return base.to_string();
    }
    for k in 1.. {
        let cand = format!("{base}_{k}");
        if !used.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

// Unfold binders sitting on modality-free paths that contain unguarded x, so
// that afterwards every unguarded occurrence of x is reachable through ∧/∨
// nodes only.
fn expose_unguarded(f: Formula, x: &str) -> Formula {
    match f {
        And(a, b) => and(expose_unguarded(*a, x), expose_unguarded(*b, x)),
        Or(a, b) => or(expose_unguarded(*a, x), expose_unguarded(*b, x)),
        Mu(y, a) if y != x && contains_unguarded(&a, x) => {
            // unfold once: θy.ψ ↦ ψ[y := θy.ψ]; the inner binder is already
            // guarded in y, so the substituted copies end up under modalities
            let binder = Mu(y.clone(), a.clone());
            expose_unguarded(a.substitute(&y, &binder), x)
        }
        Nu(y, a) if y != x && contains_unguarded(&a, x) => {
            let binder = Nu(y.clone(), a.clone());
            expose_unguarded(a.substitute(&y, &binder), x)
        }
        other => other,
    }
}

// The guard-relative occurrence check: does x occur in f with no modality on
// the path from f's root?
fn contains_unguarded(f: &Formula, x: &str) -> bool {
    match f {
        Var(y) => y == x,
        Mod(..) | DualMod(..) => false,
        Mu(y, a) | Nu(y, a) => y != x && contains_unguarded(a, x),
        _ => f.children().iter().any(|c| contains_unguarded(c, x)),
    }
}

// CNF of a monotone ∧/∨ tree over literals; a literal is any node that is not
// And/Or and not the variable x. Returns clauses as (contains-x, literals).
fn cnf(f: &Formula, x: &str) -> Vec<(bool, Vec<Formula>)> {
    match f {
        And(a, b) => {
            let mut c = cnf(a, x);
            c.extend(cnf(b, x));
            c
        }
        Or(a, b) => {
            let ca = cnf(a, x);
            let cb = cnf(b, x);
            let mut out = Vec::new();
            for (xa, la) in &ca {
                for (xb, lb) in &cb {
                    let mut lits = la.clone();
                    lits.extend(lb.clone());
                    out.push((*xa || *xb, lits));
                }
            }
            out
        }
        Var(y) if y == x => vec![(true, vec![])],
        lit => vec![(false, vec![lit.clone()])],
    }
}

// ---------------------------------------------------------------------------
// Vectorial fixpoints and Bekić linearization
// ---------------------------------------------------------------------------

/// Binder kind of a (vectorial) fixpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixKind {
    Mu,
    Nu,
}

impl FixKind {
    pub fn bind(self, x: &str, body: Formula) -> Formula {
        match self {
            FixKind::Mu => mu(x, body),
            FixKind::Nu => nu(x, body),
        }
    }
}

/// A simultaneous fixpoint: components (x₁..xₙ) with bodies that may mention
/// all the component variables.
#[derive(Clone, Debug)]
pub struct VectorialFormula {
    pub kind: FixKind,
    pub components: Vec<(String, Formula)>,
}

impl VectorialFormula {
    /// Bekić linearization: the scalar formula denoting the named component
    /// of the simultaneous fixpoint.
    pub fn bekic(&self, component: &str) -> Result<Formula, FormulaError> {
        if !self.components.iter().any(|(x, _)| x == component) {
            return Err(FormulaError::UnknownComponent(component.to_string()));
        }
        let mut comps = self.components.clone();
        // move the target component to the front, then eliminate from the back
        let idx = comps.iter().position(|(x, _)| x == component).unwrap();
        comps.swap(0, idx);
        Ok(solve(self.kind, &comps).alpha_normalize())
    }
}

// Solve for the first component by eliminating the others back-to-front.
fn solve(kind: FixKind, comps: &[(String, Formula)]) -> Formula {
    if comps.len() == 1 {
        let (x, body) = &comps[0];
        return kind.bind(x, body.clone());
    }
    let (y, g) = comps.last().unwrap();
    // solution of the last component as a function of the remaining vars;
    // fold constants as we go so dead components don't inflate the result
    let sol_y = kind.bind(y, g.clone()).simplify();
    let rest: Vec<(String, Formula)> = comps[..comps.len() - 1]
        .iter()
        .map(|(x, b)| (x.clone(), b.substitute(y, &sol_y).simplify()))
        .collect();
    solve(kind, &rest)
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Formula {
    // prec levels: 0 until/since, 1 or, 2 and, 3 unary, 4 atom
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        let paren = |f: &mut fmt::Formatter<'_>,
                     needed: bool,
                     inner: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
            if needed {
                write!(f, "(")?;
                inner(f)?;
                write!(f, ")")
            } else {
                inner(f)
            }
        };
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Prop(p) => write!(f, "{p}"),
            NegProp(p) => write!(f, "!{p}"),
            Atom(a) => write!(f, "{}", a.name()),
            NegAtom(Atom0::S) => write!(f, "nS"),
            NegAtom(Atom0::P) => write!(f, "nP"),
            NegAtom(a) => write!(f, "!{}", a.name()),
            Var(x) => write!(f, "{x}"),
            Or(a, b) => paren(f, prec > 1, &|f| {
                a.fmt_prec(f, 1)?;
                write!(f, " | ")?;
                b.fmt_prec(f, 2)
            }),
            And(a, b) => paren(f, prec > 2, &|f| {
                a.fmt_prec(f, 2)?;
                write!(f, " & ")?;
                b.fmt_prec(f, 3)
            }),
            Mod(m, a) => paren(f, prec > 3, &|f| {
                write!(f, "{} ", m.name())?;
                a.fmt_prec(f, 3)
            }),
            DualMod(m, a) => paren(f, prec > 3, &|f| {
                write!(f, "~{} ", m.name())?;
                a.fmt_prec(f, 3)
            }),
            Mu(x, a) => paren(f, prec > 3, &|f| {
                write!(f, "mu {x}. ")?;
                a.fmt_prec(f, 0)
            }),
            Nu(x, a) => paren(f, prec > 3, &|f| {
                write!(f, "nu {x}. ")?;
                a.fmt_prec(f, 0)
            }),
            Until(m, a, b) | Since(m, a, b) => {
                let opname = match (self, m) {
                    (Until(..), Mode::Global) => "Ug",
                    (Until(..), Mode::Class) => "Uc",
                    (Since(..), Mode::Global) => "Sg",
                    _ => "Sc",
                };
                paren(f, prec > 0, &|f| {
                    a.fmt_prec(f, 1)?;
                    write!(f, " {opname} ")?;
                    b.fmt_prec(f, 0)
                })
            }
            Fut(m, a) | Glob(m, a) | Past(m, a) | Hist(m, a) => {
                let base = match self {
                    Fut(..) => "F",
                    Glob(..) => "G",
                    Past(..) => "P",
                    _ => "H",
                };
                let suffix = if *m == Mode::Global { "g" } else { "c" };
                paren(f, prec > 3, &|f| {
                    write!(f, "{base}{suffix} ")?;
                    a.fmt_prec(f, 3)
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataword::{alphabet, enumerate_up_to, DataWord};
    use crate::evaluator::{eval, eval_sentence, Environment, PosSet};

    fn p(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    #[test]
    fn parse_shapes() {
        assert_eq!(p("nu x. Xg Yc x"), nu("x", md(XG, md(YC, var("x")))));
        assert_eq!(
            p("mu x. (Xg Xc x | a)"),
            mu("x", or(md(XG, md(XC, var("x"))), prop("a")))
        );
        // unbound identifiers are letter propositions
        assert_eq!(p("q"), prop("q"));
        assert_eq!(p("!q"), NegProp("q".into()));
        assert_eq!(p("nS"), NegAtom(Atom0::S));
        // precedence: & over |, unary over &
        assert_eq!(
            p("a | b & Xg c"),
            or(prop("a"), and(prop("b"), md(XG, prop("c"))))
        );
        // binder body extends maximally to the right
        assert_eq!(
            p("mu x. a | Xg x"),
            mu("x", or(prop("a"), md(XG, var("x"))))
        );
        assert!(Formula::parse("mu Xg. a").is_err());
        assert!(Formula::parse("a |").is_err());
        assert!(Formula::parse("(a").is_err());
        assert!(Formula::parse("!(a|b)").is_err());
    }

    #[test]
    fn print_parse_roundtrip() {
        for s in [
            "nu x. Xg Yc x",
            "mu x. (Xg Xc x | a)",
            "a Ug (b Uc c)",
            "(a | b) Sg c",
            "~Xc P | firstc & nS",
            "Gg (a | S)",
            "mu x. nu y. (x & Yc y | lastg)",
            "Fc a & Hc !b",
        ] {
            let f = p(s);
            let printed = format!("{f}");
            assert_eq!(p(&printed), f, "roundtrip of {s:?} via {printed:?}");
        }
    }

    #[test]
    fn shadowed_binders_are_renamed_apart() {
        let f = p("mu x. (Xg x | nu x. Yg x)");
        // both binders survive, with distinct names
        fn binders(f: &Formula, out: &mut Vec<String>) {
            if let Mu(x, _) | Nu(x, _) = f {
                out.push(x.clone());
            }
            for c in f.children() {
                binders(c, out);
            }
        }
        let mut bs = Vec::new();
        binders(&f, &mut bs);
        assert_eq!(bs.len(), 2);
        assert_ne!(bs[0], bs[1]);
    }

    #[test]
    fn desugar_shapes() {
        // φ Ug ψ = μx.ψ∨(φ∧Xg x)
        match p("a Ug b").desugar() {
            Mu(x, body) => {
                assert_eq!(*body, or(prop("b"), and(prop("a"), md(XG, Var(x)))));
            }
            other => panic!("unexpected {other:?}"),
        }
        // ~Xg φ = lastg ∨ Xg φ
        assert_eq!(
            p("~Xg a").desugar(),
            or(Atom(Atom0::LastG), md(XG, prop("a")))
        );
        // Gg φ = νx.φ∧(lastg∨Xg x)
        match p("Gg a").desugar() {
            Nu(x, body) => {
                assert_eq!(
                    *body,
                    and(prop("a"), or(Atom(Atom0::LastG), md(XG, Var(x))))
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        // desugared output is core-only
        fn core_only(f: &Formula) -> bool {
            !matches!(
                f,
                Until(..) | Since(..) | Fut(..) | Glob(..) | Past(..) | Hist(..) | DualMod(..)
            ) && f.children().iter().all(|c| core_only(c))
        }
        for s in ["a Ug b Sc c", "Gg Fc (a & ~Yc b)", "Hg (a Uc b)"] {
            assert!(core_only(&p(s).desugar()));
        }
    }

    #[test]
    fn dualize_shapes() {
        assert_eq!(p("p").dualize().unwrap(), NegProp("p".into()));
        assert_eq!(
            p("mu x. (Xg Xc x | a)").dualize().unwrap(),
            nu("x", and(wmd(XG, wmd(XC, var("x"))), NegProp("a".into())))
        );
        assert!(var("x").dualize().is_err());
    }

    #[test]
    fn guard_rewrites() {
        assert_eq!(p("mu x. (x | a)").to_guarded(), p("mu x. a"));
        assert_eq!(p("nu x. (x | a)").to_guarded(), True);
        // a guarded input is returned unchanged
        let g = p("mu x. (a | Xg x)");
        assert_eq!(g.to_guarded(), g);
        assert_eq!(p("mu x. x").to_guarded(), False);
        assert_eq!(p("nu x. x").to_guarded(), True);
    }

    #[test]
    fn to_guarded_preserves_semantics() {
        let cases = [
            "mu x. (x | a)",
            "nu x. (x | a)",
            "mu x. ((x | a) & (b | Xg x))",
            "nu x. ((x | a) & Yc x & b)",
            // unguarded variable hidden under an inner binder
            "mu x. nu y. (x | Xg y)",
            "nu x. (mu y. (x & a | Xg y)) | Yc x",
            "mu x. (x & b | a)",
        ];
        for s in cases {
            let f = p(s);
            let g = f.to_guarded();
            assert!(g.is_guarded(), "{s} -> {g} not guarded");
            for w in enumerate_up_to(&alphabet("ab"), 4) {
                assert_eq!(
                    eval_sentence(&w, &f).unwrap(),
                    eval_sentence(&w, &g).unwrap(),
                    "guarding {s} changed semantics on {w}"
                );
            }
        }
    }

    #[test]
    fn substitution_is_capture_avoiding() {
        // substituting a sentence mentioning x under a binder for x must rename
        let f = mu("y", and(var("z"), md(XG, var("y"))));
        let repl = p("mu y. (a | Xg y)");
        let g = f.substitute("z", &repl);
        assert!(g.is_sentence());
        // semantics: g should equal mu y. (repl & Xg y)
        let direct = mu("w", and(repl.clone(), md(XG, var("w"))));
        for word in enumerate_up_to(&alphabet("ab"), 4) {
            assert_eq!(
                eval_sentence(&word, &g).unwrap(),
                eval_sentence(&word, &direct).unwrap()
            );
        }
    }

    #[test]
    fn bekic_two_components() {
        let v = VectorialFormula {
            kind: FixKind::Nu,
            components: vec![
                ("x".into(), or(md(XG, var("y")), prop("p"))),
                ("y".into(), and(var("x"), prop("q"))),
            ],
        };
        let fx = v.bekic("x").unwrap();
        assert_eq!(fx, p("nu x. Xg (nu y. x & q) | p"));
        assert!(v.bekic("z").is_err());
    }

    #[test]
    fn bekic_matches_simultaneous_iteration() {
        // simultaneous gfp by joint iteration from the full sets
        fn simultaneous(
            w: &DataWord,
            comps: &[(String, Formula)],
        ) -> Vec<PosSet> {
            let n = w.len();
            let mut vals: Vec<PosSet> = comps.iter().map(|_| PosSet::full(n)).collect();
            loop {
                let mut env = Environment::new();
                for ((x, _), v) in comps.iter().zip(&vals) {
                    env.insert(x.clone(), v.clone());
                }
                let next: Vec<PosSet> = comps
                    .iter()
                    .map(|(_, b)| eval(w, b, &env).unwrap())
                    .collect();
                if next == vals {
                    return vals;
                }
                vals = next;
            }
        }
        let comps: Vec<(String, Formula)> = vec![
            ("x".into(), or(md(XG, var("y")), prop("p"))),
            ("y".into(), and(var("x"), or(prop("q"), md(YC, var("y"))))),
            ("z".into(), or(var("x"), md(XC, var("z")))),
        ];
        let v = VectorialFormula { kind: FixKind::Nu, components: comps.clone() };
        // permuted component order must give the same denotations
        let mut comps_rev = comps.clone();
        comps_rev.reverse();
        let v_rev = VectorialFormula { kind: FixKind::Nu, components: comps_rev };
        for w in enumerate_up_to(&alphabet("pq"), 4) {
            let sim = simultaneous(&w, &comps);
            for (k, (name, _)) in comps.iter().enumerate() {
                let scalar = v.bekic(name).unwrap();
                assert_eq!(
                    eval_sentence(&w, &scalar).unwrap(),
                    sim[k],
                    "component {name} on {w}"
                );
                let scalar2 = v_rev.bekic(name).unwrap();
                assert_eq!(eval_sentence(&w, &scalar2).unwrap(), sim[k]);
            }
        }
    }

    #[test]
    fn single_component_bekic() {
        let v = VectorialFormula {
            kind: FixKind::Nu,
            components: vec![("x".into(), or(prop("a"), md(XG, var("x"))))],
        };
        assert_eq!(v.bekic("x").unwrap(), p("nu x. a | Xg x"));
    }
}
