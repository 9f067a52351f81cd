//! Random Solidity function templates for synthetic corpora.
//!
//! Templates are built as text from a small weighted grammar over token-like
//! contract code (balances, allowances, timestamps, transfers), then parsed
//! and re-printed so every statement sits on its own line.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::Result;
use crate::frontend::{parse_function, print_function, FunctionAst};

const UINT_PARAMS: &[&str] =
    &["_value", "_amount", "_id", "_count", "_fee", "_rate", "_deadline", "_index", "_limit", "_price", "_days"];
const ADDR_PARAMS: &[&str] = &["_to", "_from", "_spender", "_owner", "_recipient", "_token", "_beneficiary"];
const LOCAL_NAMES: &[&str] = &[
    "amount", "total", "value", "count", "fee", "reward", "bonus", "remaining", "limit", "start", "elapsed",
    "price", "share", "hash", "ok", "allowed", "holder", "target", "delta", "weight", "stamp", "quota", "spent",
];
const FN_NAMES: &[&str] = &[
    "transfer", "claim", "deposit", "withdraw", "mint", "burn", "approve", "stake", "distribute", "refund",
    "buy", "sell", "release", "lock", "vest", "settle", "redeem", "airdrop", "collect", "sweep",
];
const UINT_STATE: &[&str] = &["totalSupply", "rate", "cap", "fee", "decimals", "startTime", "endTime", "raised"];
const ADDR_STATE: &[&str] = &["owner", "wallet", "treasury", "admin"];
const BOOL_STATE: &[&str] = &["paused", "finalized", "locked"];
const UINT_MAPS: &[&str] = &["balances", "deposits", "lastClaim", "rewards", "stakes"];
const BOOL_MAPS: &[&str] = &["frozen", "whitelist", "claimed"];
const EVENTS: &[&str] = &["Transfer", "Approval", "Deposit", "Withdrawal", "Claimed", "Burn", "Mint", "Locked"];
const INTERNAL_CALLS: &[&str] = &["_transfer", "_mint", "_burn", "_update", "_approve", "_payout"];
const LIB_OPS: &[&str] = &["add", "sub", "mul", "div"];
const LITERALS: &[&str] = &["0", "1", "2", "3", "10", "18", "100", "1000", "3600", "10000"];
const UNIT_LITERALS: &[&str] = &["1 ether", "30 days", "1 hours", "100 finney", "7 days", "1 minutes"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ty {
    Uint,
    Addr,
    Bool,
    Bytes,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    vars: Vec<(String, Ty)>,
    arrays: Vec<String>,
    used: Vec<String>,
    /// Loop counters in scope while generating a loop body.
    counters: Vec<String>,
}

impl<R: Rng> Gen<'_, R> {
    fn pick(&mut self, xs: &[&str]) -> String {
        xs.choose(self.rng).expect("non-empty pool").to_string()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn var_of(&mut self, ty: Ty) -> Option<String> {
        let pool: Vec<&String> = self.vars.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n).collect();
        pool.choose(self.rng).map(|s| s.to_string())
    }

    fn fresh(&mut self, pool: &[&str]) -> String {
        let base = self.pick(pool);
        let mut name = base.clone();
        let mut k = 2;
        while self.used.contains(&name) {
            name = format!("{base}{k}");
            k += 1;
        }
        self.used.push(name.clone());
        name
    }

    fn literal(&mut self) -> String {
        if self.chance(0.15) {
            self.pick(UNIT_LITERALS)
        } else if self.chance(0.3) {
            self.rng.random_range(2..500u32).to_string()
        } else {
            self.pick(LITERALS)
        }
    }

    fn addr(&mut self) -> String {
        match self.rng.random_range(0..10) {
            0..=3 => self.var_of(Ty::Addr).unwrap_or_else(|| "msg.sender".into()),
            4..=5 => "msg.sender".into(),
            6 => self.pick(ADDR_STATE),
            7 => "address(this)".into(),
            8 => "address(0)".into(),
            _ => match self.arrays.first().cloned() {
                Some(a) => format!("{a}[{}]", self.index()),
                None => "tx.origin".into(),
            },
        }
    }

    fn index(&mut self) -> String {
        match self.counters.last().cloned() {
            Some(c) if self.chance(0.8) => c,
            _ => self.atom_uint(),
        }
    }

    fn atom_uint(&mut self) -> String {
        match self.rng.random_range(0..14) {
            0..=3 => self.var_of(Ty::Uint).unwrap_or_else(|| self.literal()),
            4..=5 => self.literal(),
            6 => {
                let m = self.pick(UINT_MAPS);
                format!("{m}[{}]", self.addr())
            }
            7 => self.pick(UINT_STATE),
            8 => self.pick(&["block.timestamp", "msg.value", "block.number", "now"]),
            9 => match self.arrays.first().cloned() {
                Some(a) => format!("{a}.length"),
                None => "address(this).balance".into(),
            },
            10 => {
                let v = self.var_of(Ty::Uint).unwrap_or_else(|| "msg.value".into());
                format!("uint256({v})")
            }
            11 => format!("allowed[{}][{}]", self.addr(), self.addr()),
            12 => match self.counters.last().cloned() {
                Some(c) => c,
                None => self.literal(),
            },
            _ => self.var_of(Ty::Uint).unwrap_or_else(|| "totalSupply".into()),
        }
    }

    fn uint(&mut self, depth: u32) -> String {
        if depth == 0 || self.chance(0.35) {
            return self.atom_uint();
        }
        match self.rng.random_range(0..10) {
            0..=4 => {
                let op = self.pick(&["+", "-", "*", "/", "%", "*", "+"]);
                let (a, b) = (self.uint(depth - 1), self.uint(depth - 1));
                format!("{a} {op} {b}")
            }
            5..=6 => {
                let op = self.pick(LIB_OPS);
                let (a, b) = (self.lvalue_uint(), self.uint(depth - 1));
                format!("{a}.{op}({b})")
            }
            7 => format!("({})", self.uint(depth - 1)),
            8 => {
                let (c, a, b) = (self.cond(0), self.atom_uint(), self.atom_uint());
                format!("{c} ? {a} : {b}")
            }
            _ => {
                let (a, b) = (self.atom_uint(), self.atom_uint());
                format!("{a} ** {b}")
            }
        }
    }

    fn cond(&mut self, depth: u32) -> String {
        let base = match self.rng.random_range(0..10) {
            0..=3 => {
                let op = self.pick(&[">", "<", ">=", "<=", "==", "!="]);
                let (a, b) = (self.uint(1), self.uint(1));
                format!("{a} {op} {b}")
            }
            4 => {
                let op = self.pick(&["==", "!="]);
                let (a, b) = (self.addr(), self.addr());
                format!("{a} {op} {b}")
            }
            5 => {
                let m = self.pick(BOOL_MAPS);
                let neg = if self.chance(0.5) { "!" } else { "" };
                format!("{neg}{m}[{}]", self.addr())
            }
            6 => {
                let s = self.pick(BOOL_STATE);
                if self.chance(0.5) { format!("!{s}") } else { s }
            }
            7 => self.var_of(Ty::Bool).unwrap_or_else(|| "!paused".into()),
            8 => format!("{} != address(0)", self.addr()),
            _ => format!("{} >= {}", self.atom_uint(), self.atom_uint()),
        };
        if depth > 0 && self.chance(0.35) {
            let op = self.pick(&["&&", "||"]);
            format!("{base} {op} {}", self.cond(depth - 1))
        } else {
            base
        }
    }

    fn bytes(&mut self) -> String {
        match self.rng.random_range(0..3) {
            0 => format!("keccak256(abi.encodePacked({}, {}))", self.addr(), self.uint(1)),
            1 => "blockhash(block.number - 1)".into(),
            _ => format!("sha256(abi.encodePacked({}))", self.atom_uint()),
        }
    }

    fn lvalue_uint(&mut self) -> String {
        match self.rng.random_range(0..6) {
            0..=1 => self.var_of(Ty::Uint).unwrap_or_else(|| self.pick(UINT_STATE)),
            2..=3 => {
                let m = self.pick(UINT_MAPS);
                format!("{m}[{}]", self.addr())
            }
            4 => format!("allowed[{}][{}]", self.addr(), self.addr()),
            _ => self.pick(UINT_STATE),
        }
    }

    fn var_def(&mut self) -> String {
        let (ty, text) = match self.rng.random_range(0..10) {
            0..=5 => {
                let t = self.pick(&["uint256", "uint", "uint256", "uint64"]);
                (Ty::Uint, format!("{t} {{}} = {};", self.uint(2)))
            }
            6..=7 => (Ty::Addr, format!("address {{}} = {};", self.addr())),
            8 => (Ty::Bool, format!("bool {{}} = {};", self.cond(1))),
            _ => (Ty::Bytes, format!("bytes32 {{}} = {};", self.bytes())),
        };
        let name = self.fresh(LOCAL_NAMES);
        self.vars.push((name.clone(), ty));
        text.replacen("{}", &name, 1)
    }

    fn assignment(&mut self) -> String {
        if self.chance(0.12) {
            if let Some(b) = self.var_of(Ty::Bool) {
                return format!("{b} = {};", self.cond(1));
            }
        }
        if self.chance(0.1) {
            let m = self.pick(BOOL_MAPS);
            let v = self.pick(&["true", "false"]);
            return format!("{m}[{}] = {v};", self.addr());
        }
        let lhs = self.lvalue_uint();
        let op = self.pick(&["=", "=", "+=", "-=", "="]);
        format!("{lhs} {op} {};", self.uint(2))
    }

    fn require(&mut self) -> String {
        let c = self.cond(2);
        if self.chance(0.25) {
            let msg = self.pick(&["\"insufficient balance\"", "\"not allowed\"", "\"too early\"", "\"invalid amount\""]);
            format!("require({c}, {msg});")
        } else {
            format!("require({c});")
        }
    }

    fn call(&mut self) -> String {
        match self.rng.random_range(0..5) {
            0 => format!("{}.transfer({});", self.addr(), self.uint(1)),
            1 => {
                let f = self.pick(INTERNAL_CALLS);
                format!("{f}({}, {});", self.addr(), self.uint(1))
            }
            2 => format!("token.transferFrom({}, {}, {});", self.addr(), self.addr(), self.atom_uint()),
            3 => {
                let f = self.pick(INTERNAL_CALLS);
                format!("{f}({}, {}, {});", self.addr(), self.addr(), self.atom_uint())
            }
            _ => format!("{}.send({});", self.addr(), self.atom_uint()),
        }
    }

    fn emit(&mut self) -> String {
        let e = self.pick(EVENTS);
        let n = self.rng.random_range(1..=3);
        let args: Vec<String> =
            (0..n).map(|i| if i < 2 && self.chance(0.6) { self.addr() } else { self.uint(1) }).collect();
        format!("emit {e}({});", args.join(", "))
    }

    fn incdec(&mut self) -> String {
        match self.rng.random_range(0..3) {
            0 => format!("{}++;", self.lvalue_uint()),
            1 => format!("{}--;", self.lvalue_uint()),
            _ => {
                let m = self.pick(UINT_MAPS);
                format!("delete {m}[{}];", self.addr())
            }
        }
    }

    /// Statement without nested blocks, for use inside branches and loops.
    fn simple(&mut self) -> String {
        match self.rng.random_range(0..10) {
            0..=3 => self.assignment(),
            4..=5 => self.call(),
            6 => self.emit(),
            7 => self.incdec(),
            8 => self.require(),
            _ => "revert();".into(),
        }
    }

    fn block(&mut self, indent: &str, max: usize) -> String {
        let n = self.rng.random_range(1..=max);
        let inner: Vec<String> = (0..n)
            .map(|_| {
                let s = self.simple();
                format!("{indent}    {s}\n")
            })
            .collect();
        format!("{{\n{}{indent}}}", inner.concat())
    }

    fn statement(&mut self) -> String {
        let roll = self.rng.random_range(0..100);
        match roll {
            0..=23 => self.var_def(),
            24..=44 => self.assignment(),
            45..=56 => self.require(),
            57..=65 => self.call(),
            66..=72 => self.emit(),
            73..=83 => {
                let c = self.cond(1);
                let then = self.block("    ", 2);
                if self.chance(0.4) {
                    let other = self.block("    ", 2);
                    format!("if ({c}) {then} else {other}")
                } else {
                    format!("if ({c}) {then}")
                }
            }
            84..=91 => {
                let i = self.fresh(&["i", "j", "k"]);
                let bound = match self.arrays.first().cloned() {
                    Some(a) if self.chance(0.6) => format!("{a}.length"),
                    _ => self.atom_uint(),
                };
                self.counters.push(i.clone());
                let body = self.block("    ", 2);
                self.counters.pop();
                format!("for (uint256 {i} = 0; {i} < {bound}; {i}++) {body}")
            }
            92..=95 => {
                let v = self.var_of(Ty::Uint).unwrap_or_else(|| "remaining".into());
                let c = format!("{v} > {}", self.atom_uint());
                let mut body = self.block("    ", 1);
                body.truncate(body.len() - 1);
                format!("while ({c}) {body}    {v}--;\n    }}")
            }
            _ => self.incdec(),
        }
    }
}

/// Generate one template function named after `id`. Bodies hold 5 to 10
/// top-level statements plus an optional final `return`.
pub fn generate_template<R: Rng>(rng: &mut R, id: usize) -> Result<FunctionAst> {
    let mut g = Gen { rng, vars: Vec::new(), arrays: Vec::new(), used: Vec::new(), counters: Vec::new() };
    let mut params = Vec::new();
    let n_params = g.rng.random_range(1..=4);
    for k in 0..n_params {
        let (name, ty, text) = match g.rng.random_range(0..10) {
            0..=4 => {
                let n = g.fresh(UINT_PARAMS);
                (n.clone(), Some(Ty::Uint), format!("uint256 {n}"))
            }
            5..=7 => {
                let n = g.fresh(ADDR_PARAMS);
                (n.clone(), Some(Ty::Addr), format!("address {n}"))
            }
            8 if k > 0 => {
                let n = g.fresh(&["_flag", "_approved", "_enabled"]);
                (n.clone(), Some(Ty::Bool), format!("bool {n}"))
            }
            _ => {
                let n = g.fresh(&["_receivers", "_recipients", "_holders", "_targets"]);
                (n.clone(), None, format!("address[] {n}"))
            }
        };
        match ty {
            Some(t) => g.vars.push((name, t)),
            None => g.arrays.push(name),
        }
        params.push(text);
    }

    let n = g.rng.random_range(5..=10);
    let mut lines: Vec<String> = (0..n).map(|_| g.statement()).collect();
    let returns = match g.rng.random_range(0..3) {
        0 => {
            lines.push(format!("return {};", g.pick(&["true", "false"])));
            " returns (bool)"
        }
        1 => {
            lines.push(format!("return {};", g.uint(2)));
            " returns (uint256)"
        }
        _ => "",
    };
    let name = format!("{}{id}", g.pick(FN_NAMES));
    let body: String = lines.iter().map(|l| format!("    {l}\n")).collect();
    let text = format!("function {name}({}) public{returns} {{\n{body}}}\n", params.join(", "));
    let parsed = parse_function(&text)?;
    parse_function(&print_function(&parsed))
}
