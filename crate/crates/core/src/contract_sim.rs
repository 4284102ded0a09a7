//! A deterministic toy contract interpreter.
//!
//! Scenarios are native state-transition functions over a key-value store.
//! Every storage, block-attribute and balance access is logged in execution
//! order, so the emitted ledgers carry exact access logs.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::trace_model::{
    AccessMode, EventRecord, Location, Scalar, Status, TraceError, TraceLedger, TransactionRecord,
};

pub const CONTRACT_CREATION: &str = "contract creation";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario {scenario:?} has no function {signature:?}")]
    UnknownSignature { scenario: String, signature: String },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("script step {step} runs in block {block}, before its predecessor")]
    NonMonotonicScript { step: usize, block: u64 },
    #[error("malformed script record on line {line}: {reason}")]
    MalformedStep { line: usize, reason: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One scripted invocation.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Step {
    pub block: u64,
    pub caller: String,
    #[serde(rename = "sig")]
    pub signature: String,
    #[serde(rename = "in", default)]
    pub inputs: Vec<Scalar>,
    #[serde(default)]
    pub value: u64,
}

impl Step {
    pub fn new(block: u64, caller: &str, signature: &str, inputs: Vec<Scalar>, value: u64) -> Self {
        Self {
            block,
            caller: caller.to_owned(),
            signature: signature.to_owned(),
            inputs,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    steps: Vec<Step>,
}

impl Script {
    pub fn new(steps: Vec<Step>) -> Result<Self, SimError> {
        for (i, pair) in steps.windows(2).enumerate() {
            if pair[1].block < pair[0].block {
                return Err(SimError::NonMonotonicScript {
                    step: i + 2,
                    block: pair[1].block,
                });
            }
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ScriptLine {
    Step(Step),
}

/// Reads `{"type":"step",...}` records, one per line.
pub fn parse_script(input: impl BufRead) -> Result<Script, SimError> {
    let mut steps = Vec::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ScriptLine::Step(step) =
            serde_json::from_str(&line).map_err(|e| SimError::MalformedStep {
                line: index + 1,
                reason: e.to_string(),
            })?;
        steps.push(step);
    }
    Script::new(steps)
}

/// Raised by a failing `require`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Revert;

pub type CallResult = Result<Option<Scalar>, Revert>;

/// Execution context of a single invocation.
pub struct Call<'a> {
    store: &'a BTreeMap<String, Scalar>,
    pending: BTreeMap<String, Scalar>,
    log: Vec<(AccessMode, Location)>,
    pub contract: &'a str,
    pub caller: &'a str,
    pub block: u64,
    pub value: u64,
    pub inputs: &'a [Scalar],
}

impl<'a> Call<'a> {
    pub fn load(&mut self, key: &str) -> Scalar {
        self.log.push((AccessMode::Read, Location::storage(key)));
        self.pending
            .get(key)
            .or_else(|| self.store.get(key))
            .cloned()
            .unwrap_or(Scalar::Int(0))
    }

    pub fn load_int(&mut self, key: &str) -> i64 {
        match self.load(key) {
            Scalar::Int(v) => v,
            Scalar::Str(_) => 0,
        }
    }

    pub fn store(&mut self, key: &str, value: Scalar) {
        self.log.push((AccessMode::Write, Location::storage(key)));
        self.pending.insert(key.to_owned(), value);
    }

    pub fn block_number(&mut self) -> i64 {
        self.log
            .push((AccessMode::Read, Location::block("block.number")));
        self.block as i64
    }

    /// Moves currency out of the contract; only balance locations are touched.
    pub fn transfer(&mut self, to: &str, _amount: i64) {
        let own = format!("balance[{}]", self.contract);
        self.log
            .push((AccessMode::Read, Location::balance(own.clone())));
        self.log.push((AccessMode::Write, Location::balance(own)));
        self.log.push((
            AccessMode::Write,
            Location::balance(format!("balance[{to}]")),
        ));
    }

    pub fn input_int(&self, index: usize) -> i64 {
        match self.inputs.get(index) {
            Some(Scalar::Int(v)) => *v,
            _ => 0,
        }
    }

    pub fn input_str(&self, index: usize) -> String {
        self.inputs
            .get(index)
            .map(|v| v.to_string())
            .unwrap_or_default()
    }
}

pub fn require(condition: bool) -> Result<(), Revert> {
    if condition {
        Ok(())
    } else {
        Err(Revert)
    }
}

/// Hand-coded contract behavior.
pub trait Scenario {
    fn name(&self) -> &str;
    /// Account id of the contract instance.
    fn address(&self) -> &str;
    fn signatures(&self) -> &[&'static str];
    fn invoke(&self, signature: &str, call: &mut Call<'_>) -> CallResult;
}

/// Executes every step in order. Transaction ids are the 1-based step
/// positions; the first transaction is recorded as the seed.
pub fn run_scenario(scenario: &dyn Scenario, script: &Script) -> Result<TraceLedger, SimError> {
    let mut store: BTreeMap<String, Scalar> = BTreeMap::new();
    let mut transactions = Vec::with_capacity(script.steps.len());
    for (index, step) in script.steps.iter().enumerate() {
        if !scenario.signatures().contains(&step.signature.as_str()) {
            return Err(SimError::UnknownSignature {
                scenario: scenario.name().to_owned(),
                signature: step.signature.clone(),
            });
        }
        let mut call = Call {
            store: &store,
            pending: BTreeMap::new(),
            log: Vec::new(),
            contract: scenario.address(),
            caller: &step.caller,
            block: step.block,
            value: step.value,
            inputs: &step.inputs,
        };
        if step.value > 0 {
            call.log.push((
                AccessMode::Write,
                Location::balance(format!("balance[{}]", step.caller)),
            ));
            call.log.push((
                AccessMode::Write,
                Location::balance(format!("balance[{}]", scenario.address())),
            ));
        }
        let outcome = scenario.invoke(&step.signature, &mut call);
        let Call { pending, log, .. } = call;
        let (status, output) = match outcome {
            Ok(output) => {
                store.extend(pending);
                (Status::Success, output)
            }
            Err(Revert) => (Status::Error, None),
        };
        let event = EventRecord {
            caller: step.caller.clone(),
            callee: scenario.address().to_owned(),
            signature: step.signature.clone(),
            inputs: step.inputs.clone(),
            output,
            value: step.value,
            status,
        };
        transactions.push(TransactionRecord::new(
            (index + 1).to_string(),
            step.block,
            log,
            vec![event],
        ));
    }
    let seed = transactions.first().map(|t| t.id.clone());
    Ok(TraceLedger::new(transactions, seed)?)
}

// ---------------------------------------------------------------------------
// Rock-paper-scissors

/// Concurrent rock-paper-scissors games with a 4-block betting period
/// followed by a 4-block claiming period.
#[derive(Debug, Default, Clone, Copy)]
pub struct RockPaperScissors;

const RPS_PERIOD: i64 = 4;
const RPS_AMOUNT: i64 = 42;

fn game_field(gid: i64, field: &str) -> String {
    format!("A.games[{gid}].{field}")
}

/// The hand that wins between `a` and `b` (1 rock, 2 paper, 3 scissors).
fn winning_hand(a: i64, b: i64) -> i64 {
    match (a, b) {
        (1, 3) | (3, 1) => 1,
        (2, 1) | (1, 2) => 2,
        (3, 2) | (2, 3) => 3,
        _ => a,
    }
}

impl RockPaperScissors {
    fn start_game(call: &mut Call<'_>) -> CallResult {
        let count = call.load_int("A.gC") + 1;
        call.store("A.gC", Scalar::Int(count));
        let claim_start = call.block_number() + RPS_PERIOD;
        let gid = call.load_int("A.gC");
        for field in ["pA", "pB", "hA", "hB"] {
            call.store(&game_field(gid, field), Scalar::Int(0));
        }
        call.store(&game_field(gid, "cS"), Scalar::Int(claim_start));
        call.store(&format!("A.games[{gid}]"), Scalar::Int(1));
        Ok(Some(Scalar::Int(call.load_int("A.gC"))))
    }

    fn bet(call: &mut Call<'_>) -> CallResult {
        let gid = call.input_int(0);
        let position = call.input_int(1);
        let hand = call.input_int(2);
        require(0 < hand && hand < 4 && position < 2)?;
        require(call.value as i64 == RPS_AMOUNT)?;
        call.load(&format!("A.games[{gid}]"));
        let claim_start = call.load_int(&game_field(gid, "cS"));
        require(0 < claim_start && call.block_number() < claim_start)?;
        let caller = Scalar::str(call.caller);
        if call.load_int(&game_field(gid, "hA")) == 0 && position == 0 {
            call.store(&game_field(gid, "pA"), caller);
            call.store(&game_field(gid, "hA"), Scalar::Int(hand));
        } else if call.load_int(&game_field(gid, "hB")) == 0 && position == 1 {
            call.store(&game_field(gid, "pB"), caller);
            call.store(&game_field(gid, "hB"), Scalar::Int(hand));
        } else {
            require(false)?;
        }
        Ok(None)
    }

    fn claim(call: &mut Call<'_>) -> CallResult {
        let gid = call.input_int(0);
        call.load(&format!("A.games[{gid}]"));
        let claim_start = call.load_int(&game_field(gid, "cS"));
        require(0 < claim_start && claim_start <= call.block_number())?;
        require(call.block_number() < call.load_int(&game_field(gid, "cS")) + RPS_PERIOD)?;
        call.store(&game_field(gid, "cS"), Scalar::Int(0));
        let pay = |call: &mut Call<'_>, player: &str, amount: i64| {
            let to = call.load(&game_field(gid, player)).to_string();
            call.transfer(&to, amount);
        };
        if call.load_int(&game_field(gid, "hA")) == 0 && call.load_int(&game_field(gid, "hB")) != 0
        {
            pay(call, "pB", RPS_AMOUNT);
            return Ok(None);
        }
        if call.load_int(&game_field(gid, "hB")) == 0 && call.load_int(&game_field(gid, "hA")) != 0
        {
            pay(call, "pA", RPS_AMOUNT);
            return Ok(None);
        }
        let hand_a = call.load_int(&game_field(gid, "hA"));
        let hand_b = call.load_int(&game_field(gid, "hB"));
        if hand_a == hand_b {
            pay(call, "pA", RPS_AMOUNT);
            pay(call, "pB", RPS_AMOUNT);
            return Ok(None);
        }
        if winning_hand(hand_a, hand_b) == hand_b {
            pay(call, "pB", 2 * RPS_AMOUNT);
        } else {
            pay(call, "pA", 2 * RPS_AMOUNT);
        }
        Ok(None)
    }
}

impl Scenario for RockPaperScissors {
    fn name(&self) -> &str {
        "rps"
    }

    fn address(&self) -> &str {
        "0xA"
    }

    fn signatures(&self) -> &[&'static str] {
        &[CONTRACT_CREATION, "StartGame", "Bet", "Claim"]
    }

    fn invoke(&self, signature: &str, call: &mut Call<'_>) -> CallResult {
        match signature {
            CONTRACT_CREATION => {
                call.store("A.gC", Scalar::Int(0));
                Ok(None)
            }
            "StartGame" => Self::start_game(call),
            "Bet" => Self::bet(call),
            "Claim" => Self::claim(call),
            _ => Err(Revert),
        }
    }
}

/// The 16-transaction workload of four overlapping games, blocks 7 to 20.
pub fn builtin_rps_script() -> (RockPaperScissors, Script) {
    let int = |v: i64| Scalar::Int(v);
    let bet = |block, caller, gid, position, hand| {
        Step::new(
            block,
            caller,
            "Bet",
            vec![int(gid), int(position), int(hand)],
            RPS_AMOUNT as u64,
        )
    };
    let start = |block, caller| Step::new(block, caller, "StartGame", vec![], 0);
    let claim = |block, caller, gid| Step::new(block, caller, "Claim", vec![int(gid)], 0);
    let steps = vec![
        Step::new(7, "0xU0", CONTRACT_CREATION, vec![], 0),
        start(9, "0xU1"),
        start(10, "0xU3"),
        bet(10, "0xU4", 2, 1, 3),
        bet(11, "0xU1", 1, 0, 1),
        bet(12, "0xU2", 1, 1, 2),
        claim(13, "0xU2", 1),
        start(14, "0xU5"),
        claim(14, "0xU4", 2),
        bet(15, "0xU5", 3, 0, 3),
        bet(15, "0xU6", 3, 1, 1),
        start(16, "0xU7"),
        bet(17, "0xU8", 4, 1, 1),
        bet(17, "0xU7", 4, 0, 1),
        claim(20, "0xU7", 4),
        claim(20, "0xU8", 4),
    ];
    (
        RockPaperScissors,
        Script::new(steps).expect("builtin script is block-ordered"),
    )
}

// ---------------------------------------------------------------------------
// ERC20-style token

/// Token with allowances. Creation mints 100 units to every account listed
/// in its inputs.
#[derive(Debug, Default, Clone, Copy)]
pub struct Token;

const TOKEN_MINT: i64 = 100;

impl Token {
    fn create(call: &mut Call<'_>) -> CallResult {
        let holders: Vec<String> = (0..call.inputs.len()).map(|i| call.input_str(i)).collect();
        call.store(
            "T.totalSupply",
            Scalar::Int(TOKEN_MINT * holders.len() as i64),
        );
        for holder in holders {
            call.store(&format!("T.balances[{holder}]"), Scalar::Int(TOKEN_MINT));
        }
        Ok(None)
    }

    fn approve(call: &mut Call<'_>) -> CallResult {
        let spender = call.input_str(0);
        let amount = call.input_int(1);
        let owner = call.caller.to_owned();
        require(call.load_int(&format!("T.balances[{owner}]")) >= amount)?;
        call.store(
            &format!("T.allowed[{owner}][{spender}]"),
            Scalar::Int(amount),
        );
        Ok(Some(Scalar::Int(1)))
    }

    fn transfer_from(call: &mut Call<'_>) -> CallResult {
        let from = call.input_str(0);
        let to = call.input_str(1);
        let amount = call.input_int(2);
        let spender = call.caller.to_owned();
        let allowance_key = format!("T.allowed[{from}][{spender}]");
        let allowance = call.load_int(&allowance_key);
        require(allowance >= amount)?;
        let from_key = format!("T.balances[{from}]");
        let from_balance = call.load_int(&from_key);
        require(from_balance >= amount)?;
        call.store(&from_key, Scalar::Int(from_balance - amount));
        let to_key = format!("T.balances[{to}]");
        let to_balance = call.load_int(&to_key);
        call.store(&to_key, Scalar::Int(to_balance + amount));
        call.store(&allowance_key, Scalar::Int(allowance - amount));
        Ok(Some(Scalar::Int(1)))
    }
}

impl Scenario for Token {
    fn name(&self) -> &str {
        "token"
    }

    fn address(&self) -> &str {
        "0xT"
    }

    fn signatures(&self) -> &[&'static str] {
        &[CONTRACT_CREATION, "approve", "transferFrom"]
    }

    fn invoke(&self, signature: &str, call: &mut Call<'_>) -> CallResult {
        match signature {
            CONTRACT_CREATION => Self::create(call),
            "approve" => Self::approve(call),
            "transferFrom" => Self::transfer_from(call),
            _ => Err(Revert),
        }
    }
}

/// Two interleaved allowance chains. In the first chain the spender of
/// round one becomes the approver of round two; in the second chain the
/// same owner approves twice.
pub fn builtin_token_script() -> (Token, Script) {
    fn s(v: &str) -> Scalar {
        Scalar::str(v)
    }
    let approve = |block, owner: &str, spender: &str, amount| {
        Step::new(
            block,
            owner,
            "approve",
            vec![s(spender), Scalar::Int(amount)],
            0,
        )
    };
    let transfer_from = |block, spender: &str, from: &str, amount| {
        Step::new(
            block,
            spender,
            "transferFrom",
            vec![s(from), s(spender), Scalar::Int(amount)],
            0,
        )
    };
    let steps = vec![
        Step::new(
            1,
            "0xOwner",
            CONTRACT_CREATION,
            vec![s("0xU1"), s("0xU2")],
            0,
        ),
        approve(2, "0xU1", "0xV1", 30),
        approve(2, "0xU2", "0xV2", 20),
        transfer_from(3, "0xV1", "0xU1", 30),
        transfer_from(3, "0xV2", "0xU2", 20),
        approve(4, "0xV1", "0xW1", 10),
        approve(4, "0xU2", "0xW2", 10),
        transfer_from(5, "0xW1", "0xV1", 10),
        transfer_from(5, "0xW2", "0xU2", 10),
    ];
    (
        Token,
        Script::new(steps).expect("builtin script is block-ordered"),
    )
}

/// Looks up a builtin scenario together with its default script.
pub fn builtin(name: &str) -> Result<(Box<dyn Scenario>, Script), SimError> {
    match name {
        "rps" => {
            let (scenario, script) = builtin_rps_script();
            Ok((Box::new(scenario), script))
        }
        "token" => {
            let (scenario, script) = builtin_token_script();
            Ok((Box::new(scenario), script))
        }
        other => Err(SimError::UnknownScenario(other.to_owned())),
    }
}

pub fn rps_ledger() -> TraceLedger {
    let (scenario, script) = builtin_rps_script();
    run_scenario(&scenario, &script).expect("builtin rps script runs")
}

pub fn token_ledger() -> TraceLedger {
    let (scenario, script) = builtin_token_script();
    run_scenario(&scenario, &script).expect("builtin token script runs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::serialize_trace;

    fn accessed(tx: &TransactionRecord, mode: AccessMode, name: &str) -> bool {
        tx.accesses
            .iter()
            .any(|a| a.mode == mode && a.location.name == name)
    }

    #[test]
    fn rps_script_matches_table() {
        let (_, script) = builtin_rps_script();
        let steps = script.steps();
        assert_eq!(steps.len(), 16);
        assert_eq!(steps[0].signature, CONTRACT_CREATION);
        assert_eq!(steps[0].block, 7);
        assert_eq!(steps[3].block, 10);
        assert_eq!(steps[3].signature, "Bet");
        assert_eq!(
            steps[3].inputs,
            vec![Scalar::Int(2), Scalar::Int(1), Scalar::Int(3)]
        );
        assert_eq!(steps[3].value, 42);
        assert_eq!(steps[15].block, 20);
    }

    #[test]
    fn rps_run_records_outcomes() {
        let ledger = rps_ledger();
        assert_eq!(ledger.len(), 16);
        let txs = ledger.transactions();
        let outputs: Vec<Option<Scalar>> = [1, 2, 7, 11]
            .iter()
            .map(|&i| txs[i].events[0].output.clone())
            .collect();
        assert_eq!(outputs, [1, 2, 3, 4].map(|g| Some(Scalar::Int(g))).to_vec());
        for (i, tx) in txs.iter().enumerate() {
            let expected = if i == 15 {
                Status::Error
            } else {
                Status::Success
            };
            assert_eq!(tx.events[0].status, expected, "transaction {}", tx.id);
        }
        // double claim is blocked by the zeroed claim start
        let t16 = &txs[15];
        assert!(t16.reverted());
        assert!(accessed(t16, AccessMode::Read, "A.games[4].cS"));
        assert!(!t16.accesses.iter().any(|a| a.mode == AccessMode::Write));
        assert!(accessed(&txs[4], AccessMode::Write, "A.games[1].pA"));
        assert!(accessed(&txs[2], AccessMode::Read, "block.number"));
    }

    #[test]
    fn late_bet_reverts_without_state_change() {
        let (scenario, _) = builtin_rps_script();
        let steps = vec![
            Step::new(1, "0xU0", CONTRACT_CREATION, vec![], 0),
            Step::new(2, "0xU1", "StartGame", vec![], 0),
            // claim start is block 6, so a bet in block 6 is too late
            Step::new(
                6,
                "0xU1",
                "Bet",
                vec![Scalar::Int(1), Scalar::Int(0), Scalar::Int(1)],
                42,
            ),
            Step::new(6, "0xU2", "Claim", vec![Scalar::Int(1)], 0),
        ];
        let ledger = run_scenario(&scenario, &Script::new(steps).unwrap()).unwrap();
        let bet = &ledger.transactions()[2];
        assert_eq!(bet.events[0].status, Status::Error);
        assert!(accessed(bet, AccessMode::Read, "A.games[1].cS"));
        assert!(accessed(bet, AccessMode::Read, "block.number"));
        assert!(!bet
            .accesses
            .iter()
            .any(|a| a.mode == AccessMode::Write && !a.location.is_balance()));
        let claim = &ledger.transactions()[3];
        assert_eq!(claim.events[0].status, Status::Success);
    }

    #[test]
    fn reverted_writes_do_not_reach_state() {
        struct Faulty;
        impl Scenario for Faulty {
            fn name(&self) -> &str {
                "faulty"
            }
            fn address(&self) -> &str {
                "0xF"
            }
            fn signatures(&self) -> &[&'static str] {
                &["set", "get"]
            }
            fn invoke(&self, signature: &str, call: &mut Call<'_>) -> CallResult {
                if signature == "set" {
                    call.store("F.x", Scalar::Int(7));
                    require(false)?;
                }
                Ok(Some(call.load("F.x")))
            }
        }
        let script = Script::new(vec![
            Step::new(1, "a", "set", vec![], 0),
            Step::new(1, "a", "get", vec![], 0),
        ])
        .unwrap();
        let ledger = run_scenario(&Faulty, &script).unwrap();
        let set = &ledger.transactions()[0];
        assert!(accessed(set, AccessMode::Write, "F.x"));
        assert_eq!(set.events[0].status, Status::Error);
        assert_eq!(
            ledger.transactions()[1].events[0].output,
            Some(Scalar::Int(0))
        );
    }

    #[test]
    fn unknown_signature_and_empty_script() {
        let script = Script::new(vec![Step::new(1, "a", "Explode", vec![], 0)]).unwrap();
        assert!(matches!(
            run_scenario(&RockPaperScissors, &script),
            Err(SimError::UnknownSignature { .. })
        ));
        let empty = run_scenario(&RockPaperScissors, &Script::default()).unwrap();
        assert!(empty.is_empty());
        assert!(matches!(
            builtin("chess"),
            Err(SimError::UnknownScenario(_))
        ));
    }

    #[test]
    fn token_script_pairs_approvals_with_transfers() {
        let (_, script) = builtin_token_script();
        let steps = script.steps();
        let mut pairs = std::collections::BTreeSet::new();
        for (i, step) in steps.iter().enumerate() {
            if step.signature != "transferFrom" {
                continue;
            }
            let owner = step.inputs[0].to_string();
            let approved = steps[..i].iter().any(|s| {
                s.signature == "approve"
                    && s.caller == owner
                    && s.inputs[0].to_string() == step.caller
            });
            assert!(approved, "transferFrom at step {} lacks an approve", i + 1);
            assert_eq!(step.inputs[1].to_string(), step.caller);
            pairs.insert((owner, step.caller.clone()));
        }
        assert!(pairs.len() >= 2);
        assert!(pairs.contains(&("0xU1".to_owned(), "0xV1".to_owned())));
        let ledger = token_ledger();
        assert!(ledger
            .transactions()
            .iter()
            .all(|t| t.events[0].status == Status::Success));
    }

    #[test]
    fn runs_are_byte_identical() {
        assert_eq!(
            serialize_trace(&rps_ledger()),
            serialize_trace(&rps_ledger())
        );
        assert_eq!(
            serialize_trace(&token_ledger()),
            serialize_trace(&token_ledger())
        );
    }

    #[test]
    fn parses_step_records() {
        let text = "{\"type\":\"step\",\"block\":3,\"caller\":\"0xU1\",\"sig\":\"StartGame\"}\n\
                    {\"type\":\"step\",\"block\":4,\"caller\":\"0xU1\",\"sig\":\"Bet\",\"in\":[1,0,2],\"value\":42}\n";
        let script = parse_script(text.as_bytes()).unwrap();
        assert_eq!(script.steps().len(), 2);
        assert_eq!(script.steps()[1].value, 42);
        let bad = "{\"type\":\"step\",\"block\":3,\"caller\":\"0xU1\",\"sig\":\"A\"}\n{\"type\":\"step\",\"block\":2,\"caller\":\"0xU1\",\"sig\":\"A\"}";
        assert!(matches!(
            parse_script(bad.as_bytes()),
            Err(SimError::NonMonotonicScript { .. })
        ));
    }
}
