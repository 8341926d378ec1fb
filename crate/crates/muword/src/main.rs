//! Command-line entry point. Every subcommand prints a single JSON value on
//! stdout; `--pretty` switches to indented output. Exit codes: 0 success,
//! 1 property violated (formula fails, counterexample found), 2 usage or
//! parse error.

use std::fs;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use muword::cascades::{
    bma_to_cascade, br_to_cmt_cascade, cascade_to_formula, cmt_cascade_to_formula, run_cascade,
    run_cmt_cascade,
};
use muword::dataauto::{bounded_emptiness, from_nu_formula, membership};
use muword::dataword::{enumerate_up_to, DataWord};
use muword::dltl::{dltl_to_mu, fo2_to_udltl, udltl_to_fo2, Dltl, Fo2};
use muword::evaluator::{eval_sentence, models};
use muword::formula::Formula;
use muword::fragments::{comp_height, is_mu_only, is_nu_only, Basis};
use muword::reductions::{bounded_search, encode_solution, pcp_formula, PcpInstance};
use muword::testkit::{equivalence_check, Acceptor};

#[derive(Parser)]
#[command(name = "muword", version, about = "μ-calculus on finite data words")]
struct Cli {
    /// Indented JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Bma,
    Br,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransSrc {
    Dltl,
    Fo2,
    Udltl,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransDst {
    Mu,
    Udltl,
    Fo2,
}

#[derive(Subcommand)]
enum Cmd {
    /// Positions of a data word satisfying a sentence.
    Eval {
        #[arg(short, long)]
        formula: String,
        #[arg(short, long)]
        word: String,
    },
    /// Does the word model the sentence at position 1? Exit 1 if not.
    Check {
        #[arg(short, long)]
        formula: String,
        #[arg(short, long)]
        word: String,
    },
    /// Comp-heights over the BR and BMA bases, plus basic fragment facts.
    Classify {
        #[arg(short, long)]
        formula: String,
    },
    /// Rewrite a formula: exactly one of --guarded, --dual, --desugar.
    #[command(group(ArgGroup::new("form").required(true).args(["guarded", "dual", "desugar"])))]
    Normalize {
        #[arg(short, long)]
        formula: String,
        #[arg(long)]
        guarded: bool,
        #[arg(long)]
        dual: bool,
        #[arg(long)]
        desugar: bool,
    },
    /// Compile a guarded ν-sentence to a data automaton.
    ToDa {
        #[arg(short, long)]
        formula: String,
    },
    /// Membership of a word in the data automaton compiled from a ν-sentence.
    DaMember {
        #[arg(short, long)]
        formula: String,
        #[arg(short, long)]
        word: String,
    },
    /// Enumeration-order search for an accepted word of bounded length.
    DaEmpty {
        #[arg(short, long)]
        formula: String,
        #[arg(long, default_value = "ab")]
        sigma: String,
        #[arg(long, default_value_t = 4)]
        max_len: usize,
    },
    /// Compile a BMA formula to a marking-transducer cascade (or a BR formula
    /// to a CMT cascade with --basis br).
    ToCascade {
        #[arg(short, long)]
        formula: String,
        #[arg(long, value_enum, default_value_t = BasisArg::Bma)]
        basis: BasisArg,
        /// Linearize boolean combinations into a single stage chain.
        #[arg(long)]
        sequential: bool,
    },
    /// Run the compiled cascade on a word and report output and acceptance.
    RunCascade {
        #[arg(short, long)]
        formula: String,
        #[arg(short, long)]
        word: String,
        #[arg(long, value_enum, default_value_t = BasisArg::Bma)]
        basis: BasisArg,
        #[arg(long)]
        sequential: bool,
    },
    /// Translate between logics: dltl→mu, fo2→udltl, udltl→fo2.
    Translate {
        #[arg(long, value_enum)]
        from: TransSrc,
        #[arg(long, value_enum)]
        to: TransDst,
        #[arg(short, long)]
        formula: String,
    },
    /// PCP instance to μ-only formula; optionally encode a candidate solution
    /// or search for one up to a bounded word length.
    Pcp {
        /// JSON file holding a list of tile pairs: [["cd","c"], ["d","dd"]]
        #[arg(long)]
        instance: String,
        /// Whitespace-separated 1-based tile indices to encode and check.
        #[arg(long)]
        encode: Option<String>,
        /// Search for a satisfying encoding of length ≤ this bound.
        #[arg(long)]
        search: Option<usize>,
    },
    /// Exhaustive language equivalence of two acceptors; exit 1 on a
    /// counterexample. Acceptor spec: backend:text or backend:@file, backend
    /// ∈ formula | nu-da | bma-cascade | br-cascade | dltl | fo2.
    Equiv {
        #[arg(long)]
        lhs: String,
        #[arg(long)]
        rhs: String,
        #[arg(long, default_value = "ab")]
        sigma: String,
        #[arg(long, default_value_t = 4)]
        max_len: usize,
    },
    /// Canonical data-word enumeration.
    Enum {
        #[arg(long, default_value = "ab")]
        sigma: String,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
    },
}

fn sigma_of(s: &str) -> Vec<String> {
    s.split(',').flat_map(|part| part.chars()).map(|c| c.to_string()).collect()
}

fn parse_formula(s: &str) -> Result<Formula, String> {
    Formula::parse(s).map_err(|e| format!("formula {s:?}: {e}"))
}

fn parse_word(s: &str) -> Result<DataWord, String> {
    DataWord::parse(s).map_err(|e| format!("word {s:?}: {e}"))
}

fn parse_acceptor(spec: &str) -> Result<Acceptor, String> {
    let (backend, rest) =
        spec.split_once(':').ok_or_else(|| format!("acceptor spec {spec:?}: expected backend:text"))?;
    let text = match rest.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?,
        None => rest.to_string(),
    };
    let text = text.trim();
    Ok(match backend {
        "formula" => Acceptor::Formula(parse_formula(text)?),
        "nu-da" => {
            let (da, _) = from_nu_formula(&parse_formula(text)?).map_err(|e| e.to_string())?;
            Acceptor::Automaton(da)
        }
        "bma-cascade" => Acceptor::Cascade(
            bma_to_cascade(&parse_formula(text)?, false).map_err(|e| e.to_string())?,
        ),
        "br-cascade" => Acceptor::CmtCascade(
            br_to_cmt_cascade(&parse_formula(text)?).map_err(|e| e.to_string())?,
        ),
        "dltl" => Acceptor::Dltl(Dltl::parse(text).map_err(|e| e.to_string())?),
        "fo2" => Acceptor::Fo2(Fo2::parse(text).map_err(|e| e.to_string())?),
        other => return Err(format!("unknown acceptor backend {other:?}")),
    })
}

/// Ok((json, exit_code)); Err is a usage/parse error (exit 2).
fn run(cmd: Cmd) -> Result<(Value, u8), String> {
    match cmd {
        Cmd::Eval { formula, word } => {
            let f = parse_formula(&formula)?;
            let w = parse_word(&word)?;
            let ps = eval_sentence(&w, &f).map_err(|e| e.to_string())?;
            Ok((json!({ "positions": ps.positions() }), 0))
        }
        Cmd::Check { formula, word } => {
            let f = parse_formula(&formula)?;
            let w = parse_word(&word)?;
            let m = models(&w, &f).map_err(|e| e.to_string())?;
            Ok((json!({ "models": m }), if m { 0 } else { 1 }))
        }
        Cmd::Classify { formula } => {
            let f = parse_formula(&formula)?;
            let br = comp_height(&f, Basis::Br).map(|(h, _)| h);
            let bma = comp_height(&f, Basis::Bma).map(|(h, _)| h);
            Ok((
                json!({
                    "br": br,
                    "bma": bma,
                    "guarded": f.is_guarded(),
                    "mu_only": is_mu_only(&f),
                    "nu_only": is_nu_only(&f),
                    "sentence": f.is_sentence(),
                }),
                0,
            ))
        }
        Cmd::Normalize { formula, guarded, dual, desugar } => {
            let f = parse_formula(&formula)?;
            let out = if guarded {
                f.to_guarded()
            } else if dual {
                f.dualize().map_err(|e| e.to_string())?
            } else {
                assert!(desugar);
                f.desugar()
            };
            Ok((json!({ "formula": out.to_string() }), 0))
        }
        Cmd::ToDa { formula } => {
            let f = parse_formula(&formula)?;
            let (da, _) = from_nu_formula(&f).map_err(|e| e.to_string())?;
            Ok((json!({ "automaton": da }), 0))
        }
        Cmd::DaMember { formula, word } => {
            let f = parse_formula(&formula)?;
            let w = parse_word(&word)?;
            let (da, _) = from_nu_formula(&f).map_err(|e| e.to_string())?;
            let m = membership(&da, &w).map_err(|e| e.to_string())?;
            Ok((json!({ "member": m }), 0))
        }
        Cmd::DaEmpty { formula, sigma, max_len } => {
            let f = parse_formula(&formula)?;
            let (da, _) = from_nu_formula(&f).map_err(|e| e.to_string())?;
            let witness =
                bounded_emptiness(&da, &sigma_of(&sigma), max_len).map_err(|e| e.to_string())?;
            Ok((
                json!({
                    "empty_up_to": max_len,
                    "witness": witness.map(|w| w.to_string()),
                }),
                0,
            ))
        }
        Cmd::ToCascade { formula, basis, sequential } => {
            let f = parse_formula(&formula)?;
            match basis {
                BasisArg::Bma => {
                    let c = bma_to_cascade(&f, sequential).map_err(|e| e.to_string())?;
                    let back = cascade_to_formula(&c).map_err(|e| e.to_string())?;
                    Ok((
                        json!({
                            "cascade": c,
                            "stages": c.stages.len(),
                            "formula": back.to_string(),
                        }),
                        0,
                    ))
                }
                BasisArg::Br => {
                    let c = br_to_cmt_cascade(&f).map_err(|e| e.to_string())?;
                    let back = cmt_cascade_to_formula(&c).map_err(|e| e.to_string())?;
                    Ok((
                        json!({
                            "cascade": c,
                            "stages": c.stages.len(),
                            "formula": back.to_string(),
                        }),
                        0,
                    ))
                }
            }
        }
        Cmd::RunCascade { formula, word, basis, sequential } => {
            let f = parse_formula(&formula)?;
            let w = parse_word(&word)?;
            let (out, acc) = match basis {
                BasisArg::Bma => {
                    let c = bma_to_cascade(&f, sequential).map_err(|e| e.to_string())?;
                    (
                        run_cascade(&c, &w).map_err(|e| e.to_string())?,
                        muword::cascades::cascade_accepts(&c, &w).map_err(|e| e.to_string())?,
                    )
                }
                BasisArg::Br => {
                    let c = br_to_cmt_cascade(&f).map_err(|e| e.to_string())?;
                    (
                        run_cmt_cascade(&c, &w).map_err(|e| e.to_string())?,
                        muword::cascades::cmt_cascade_accepts(&c, &w).map_err(|e| e.to_string())?,
                    )
                }
            };
            Ok((json!({ "output": out.map(|o| o.to_string()), "accepts": acc }), 0))
        }
        Cmd::Translate { from, to, formula } => match (from, to) {
            (TransSrc::Dltl, TransDst::Mu) => {
                let d = Dltl::parse(&formula).map_err(|e| e.to_string())?;
                Ok((json!({ "formula": dltl_to_mu(&d).to_string() }), 0))
            }
            (TransSrc::Fo2, TransDst::Udltl) => {
                let f = Fo2::parse(&formula).map_err(|e| e.to_string())?;
                let d = fo2_to_udltl(&f).map_err(|e| e.to_string())?;
                Ok((
                    json!({
                        "formula": d.to_string(),
                        "modal_depth": d.modal_depth(),
                        "quantifier_depth": f.quantifier_depth(),
                    }),
                    0,
                ))
            }
            (TransSrc::Udltl, TransDst::Fo2) => {
                let d = Dltl::parse(&formula).map_err(|e| e.to_string())?;
                let f = udltl_to_fo2(&d).map_err(|e| e.to_string())?;
                Ok((
                    json!({
                        "formula": f.to_string(),
                        "quantifier_depth": f.quantifier_depth(),
                        "size": f.size(),
                    }),
                    0,
                ))
            }
            _ => Err("unsupported translation; use dltl→mu, fo2→udltl or udltl→fo2".into()),
        },
        Cmd::Pcp { instance, encode, search } => {
            let text = fs::read_to_string(&instance).map_err(|e| format!("{instance}: {e}"))?;
            let inst = PcpInstance::from_json(&text).map_err(|e| e.to_string())?;
            let phi = pcp_formula(&inst).map_err(|e| e.to_string())?;
            let mut out = json!({
                "pairs": inst.pairs,
                "formula": phi.to_string(),
            });
            if let Some(seq) = encode {
                let idx: Vec<usize> = seq
                    .split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|e| format!("index {t:?}: {e}")))
                    .collect::<Result<_, _>>()?;
                let w = encode_solution(&inst, &idx).map_err(|e| e.to_string())?;
                let m = models(&w, &phi).map_err(|e| e.to_string())?;
                out["encoded"] = json!({ "word": w.to_string(), "models": m });
            }
            if let Some(bound) = search {
                let found = bounded_search(&inst, bound);
                out["search"] =
                    json!({ "max_len": bound, "witness": found.map(|w| w.to_string()) });
            }
            Ok((out, 0))
        }
        Cmd::Equiv { lhs, rhs, sigma, max_len } => {
            let a = parse_acceptor(&lhs)?;
            let b = parse_acceptor(&rhs)?;
            let (cex, visited) =
                equivalence_check(&a, &b, &sigma_of(&sigma), max_len).map_err(|e| e.to_string())?;
            let code = if cex.is_some() { 1 } else { 0 };
            Ok((
                json!({
                    "counterexample": cex.map(|c| {
                        json!({ "word": c.word.to_string(), "lhs": c.lhs, "rhs": c.rhs })
                    }),
                    "visited": visited,
                }),
                code,
            ))
        }
        Cmd::Enum { sigma, max_len } => {
            let words: Vec<String> =
                enumerate_up_to(&sigma_of(&sigma), max_len).iter().map(|w| w.to_string()).collect();
            Ok((json!({ "count": words.len(), "words": words }), 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok((value, code)) => {
            let text = if cli.pretty {
                serde_json::to_string_pretty(&value).unwrap()
            } else {
                serde_json::to_string(&value).unwrap()
            };
            println!("{text}");
            ExitCode::from(code)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
