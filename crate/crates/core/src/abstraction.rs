//! Event abstractions and recipes.
//!
//! A recipe chooses, per function signature and event field, whether the
//! field stays concrete, becomes a symbolic variable, or is dropped. The
//! variable abstraction introduces one variable per field occurrence; the
//! side table remembers the concrete value behind every variable slot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automaton::Move;
use crate::sessions::History;
use crate::trace_model::{EventRecord, Scalar, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Caller,
    Callee,
    Signature,
    Input(usize),
    Output,
    Value,
    Status,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Caller => f.write_str("Caller"),
            Field::Callee => f.write_str("Callee"),
            Field::Signature => f.write_str("Signature"),
            Field::Input(i) => write!(f, "Input[{i}]"),
            Field::Output => f.write_str("Output"),
            Field::Value => f.write_str("Value"),
            Field::Status => f.write_str("Status"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldKey {
    pub signature: String,
    pub field: Field,
}

impl FieldKey {
    pub fn new(signature: impl Into<String>, field: Field) -> Self {
        Self {
            signature: signature.into(),
            field,
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum FieldAbstraction {
    #[default]
    Identity,
    Variable,
    Top,
}

impl FieldAbstraction {
    pub const ALL: [FieldAbstraction; 3] = [
        FieldAbstraction::Identity,
        FieldAbstraction::Variable,
        FieldAbstraction::Top,
    ];
}

/// Event abstractions plus automaton moves. Keys not present in the map use
/// the identity abstraction.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "RecipeFile", from = "RecipeFile")]
pub struct Recipe {
    abstractions: BTreeMap<FieldKey, FieldAbstraction>,
    pub moves: Vec<Move>,
}

#[derive(Serialize, Deserialize)]
struct AbstractionEntry {
    signature: String,
    field: Field,
    abstraction: FieldAbstraction,
}

#[derive(Serialize, Deserialize)]
struct RecipeFile {
    #[serde(default)]
    abstractions: Vec<AbstractionEntry>,
    #[serde(default)]
    moves: Vec<Move>,
}

impl From<Recipe> for RecipeFile {
    fn from(r: Recipe) -> Self {
        RecipeFile {
            abstractions: r
                .abstractions
                .into_iter()
                .map(|(k, a)| AbstractionEntry {
                    signature: k.signature,
                    field: k.field,
                    abstraction: a,
                })
                .collect(),
            moves: r.moves,
        }
    }
}

impl From<RecipeFile> for Recipe {
    fn from(f: RecipeFile) -> Self {
        let mut recipe = Recipe {
            moves: f.moves,
            ..Recipe::default()
        };
        for e in f.abstractions {
            recipe.set_abstraction(FieldKey::new(e.signature, e.field), e.abstraction);
        }
        recipe
    }
}

impl Recipe {
    pub fn abstraction(&self, signature: &str, field: Field) -> FieldAbstraction {
        if field == Field::Status {
            return FieldAbstraction::Identity;
        }
        // Avoids allocating a key for the common identity lookup.
        self.abstractions
            .iter()
            .find(|(k, _)| k.field == field && k.signature == signature)
            .map(|(_, a)| *a)
            .unwrap_or_default()
    }

    pub fn set_abstraction(&mut self, key: FieldKey, abstraction: FieldAbstraction) {
        if abstraction == FieldAbstraction::Identity || key.field == Field::Status {
            self.abstractions.remove(&key);
        } else {
            self.abstractions.insert(key, abstraction);
        }
    }

    pub fn with_abstraction(mut self, signature: &str, field: Field, a: FieldAbstraction) -> Self {
        self.set_abstraction(FieldKey::new(signature, field), a);
        self
    }

    pub fn with_move(mut self, m: Move) -> Self {
        self.moves.push(m);
        self
    }

    /// Non-identity entries.
    pub fn abstractions(&self) -> &BTreeMap<FieldKey, FieldAbstraction> {
        &self.abstractions
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipes always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// All-identity abstractions and no moves.
pub fn identity_recipe() -> Recipe {
    Recipe::default()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbstractValue {
    Concrete(Scalar),
    Var { name: String, fresh: bool },
    Top,
}

impl AbstractValue {
    pub fn var(name: impl Into<String>) -> Self {
        AbstractValue::Var {
            name: name.into(),
            fresh: false,
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            AbstractValue::Var { name, .. } => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for AbstractValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractValue::Concrete(v) => write!(f, "{v}"),
            AbstractValue::Var { name, fresh: true } => write!(f, "*{name}"),
            AbstractValue::Var { name, fresh: false } => f.write_str(name),
            AbstractValue::Top => f.write_str("T"),
        }
    }
}

/// An abstract event: one value per field. Status is always concrete.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractEvent {
    pub caller: AbstractValue,
    pub callee: AbstractValue,
    pub signature: AbstractValue,
    pub inputs: Vec<AbstractValue>,
    pub output: AbstractValue,
    pub value: AbstractValue,
    pub status: Status,
}

impl AbstractEvent {
    /// Field slots in canonical order: caller, callee, signature, inputs,
    /// output, value.
    pub fn slots(&self) -> impl Iterator<Item = (Field, &AbstractValue)> {
        [
            (Field::Caller, &self.caller),
            (Field::Callee, &self.callee),
            (Field::Signature, &self.signature),
        ]
        .into_iter()
        .chain(
            self.inputs
                .iter()
                .enumerate()
                .map(|(i, v)| (Field::Input(i), v)),
        )
        .chain([(Field::Output, &self.output), (Field::Value, &self.value)])
    }

    pub fn slots_mut(&mut self) -> impl Iterator<Item = (Field, &mut AbstractValue)> {
        [
            (Field::Caller, &mut self.caller),
            (Field::Callee, &mut self.callee),
            (Field::Signature, &mut self.signature),
        ]
        .into_iter()
        .chain(
            self.inputs
                .iter_mut()
                .enumerate()
                .map(|(i, v)| (Field::Input(i), v)),
        )
        .chain([
            (Field::Output, &mut self.output),
            (Field::Value, &mut self.value),
        ])
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.slots().filter_map(|(_, v)| v.var_name())
    }

    /// Same event with variable names and freshness erased.
    pub fn shape(&self) -> AbstractEvent {
        let mut out = self.clone();
        for (_, v) in out.slots_mut() {
            if let AbstractValue::Var { .. } = v {
                *v = AbstractValue::var("");
            }
        }
        out
    }
}

/// Concrete value of a field; `None` for a missing output and for status.
pub fn field_value(event: &EventRecord, field: Field) -> Option<Scalar> {
    match field {
        Field::Caller => Some(Scalar::Str(event.caller.clone())),
        Field::Callee => Some(Scalar::Str(event.callee.clone())),
        Field::Signature => Some(Scalar::Str(event.signature.clone())),
        Field::Input(i) => event.inputs.get(i).cloned(),
        Field::Output => event.output.clone(),
        Field::Value => Some(Scalar::Int(event.value as i64)),
        Field::Status => None,
    }
}

/// Position of an event in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence {
    pub history: usize,
    pub position: usize,
}

impl Occurrence {
    pub fn new(history: usize, position: usize) -> Self {
        Self { history, position }
    }
}

/// Concrete values behind variable slots.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SideTable {
    slots: BTreeMap<(Occurrence, Field), Scalar>,
    origins: BTreeMap<String, (Occurrence, Field)>,
}

impl SideTable {
    pub fn value(&self, occurrence: Occurrence, field: Field) -> Option<&Scalar> {
        self.slots.get(&(occurrence, field))
    }

    /// The slot a variable was created for.
    pub fn origin(&self, name: &str) -> Option<(Occurrence, Field)> {
        self.origins.get(name).copied()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.origins.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

/// Abstract histories (event `j` of history `i` has provenance `(i, j)`)
/// and the side table for their variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractCorpus {
    pub histories: Vec<Vec<AbstractEvent>>,
    pub side_table: SideTable,
}

pub fn abstract_histories(histories: &[History], recipe: &Recipe) -> AbstractCorpus {
    let concrete: Vec<&[EventRecord]> = histories.iter().map(|h| h.events.as_slice()).collect();
    abstract_event_lists(&concrete, recipe)
}

pub fn abstract_event_lists(histories: &[&[EventRecord]], recipe: &Recipe) -> AbstractCorpus {
    let mut side_table = SideTable::default();
    let mut counter = 0usize;
    let mut out = Vec::with_capacity(histories.len());
    for (h, events) in histories.iter().enumerate() {
        let mut abstracted = Vec::with_capacity(events.len());
        for (p, event) in events.iter().enumerate() {
            let occurrence = Occurrence::new(h, p);
            let mut value_of = |field: Field| -> AbstractValue {
                let Some(value) = field_value(event, field) else {
                    return AbstractValue::Top;
                };
                match recipe.abstraction(&event.signature, field) {
                    FieldAbstraction::Identity => AbstractValue::Concrete(value),
                    FieldAbstraction::Top => AbstractValue::Top,
                    FieldAbstraction::Variable => {
                        let name = format!("v{counter}");
                        counter += 1;
                        side_table.slots.insert((occurrence, field), value);
                        side_table.origins.insert(name.clone(), (occurrence, field));
                        AbstractValue::var(name)
                    }
                }
            };
            let caller = value_of(Field::Caller);
            let callee = value_of(Field::Callee);
            let signature = value_of(Field::Signature);
            let inputs = (0..event.inputs.len())
                .map(|i| value_of(Field::Input(i)))
                .collect();
            let output = value_of(Field::Output);
            let value = value_of(Field::Value);
            abstracted.push(AbstractEvent {
                caller,
                callee,
                signature,
                inputs,
                output,
                value,
                status: event.status,
            });
        }
        out.push(abstracted);
    }
    AbstractCorpus {
        histories: out,
        side_table,
    }
}

/// Rebuilds concrete events. Fails on a `Top` anywhere but a missing output.
pub fn concretize(corpus: &AbstractCorpus) -> Option<Vec<Vec<EventRecord>>> {
    corpus
        .histories
        .iter()
        .enumerate()
        .map(|(h, events)| {
            events
                .iter()
                .enumerate()
                .map(|(p, e)| concretize_event(e, &corpus.side_table, Occurrence::new(h, p)))
                .collect()
        })
        .collect()
}

fn concretize_event(e: &AbstractEvent, side: &SideTable, occ: Occurrence) -> Option<EventRecord> {
    let resolve = |field: Field, v: &AbstractValue| -> Option<Scalar> {
        match v {
            AbstractValue::Concrete(s) => Some(s.clone()),
            AbstractValue::Var { .. } => side.value(occ, field).cloned(),
            AbstractValue::Top => None,
        }
    };
    let text = |field: Field, v: &AbstractValue| -> Option<String> {
        match resolve(field, v)? {
            Scalar::Str(s) => Some(s),
            Scalar::Int(_) => None,
        }
    };
    let value = match resolve(Field::Value, &e.value)? {
        Scalar::Int(v) if v >= 0 => v as u64,
        _ => return None,
    };
    let output = match &e.output {
        AbstractValue::Top => None,
        other => Some(resolve(Field::Output, other)?),
    };
    Some(EventRecord {
        caller: text(Field::Caller, &e.caller)?,
        callee: text(Field::Callee, &e.callee)?,
        signature: text(Field::Signature, &e.signature)?,
        inputs: e
            .inputs
            .iter()
            .enumerate()
            .map(|(i, v)| resolve(Field::Input(i), v))
            .collect::<Option<_>>()?,
        output,
        value,
        status: e.status,
    })
}

/// Every abstractable field key occurring in the corpus.
pub fn field_keys(histories: &[History]) -> BTreeSet<FieldKey> {
    let mut keys = BTreeSet::new();
    for event in histories.iter().flat_map(|h| &h.events) {
        let sig = &event.signature;
        for field in [
            Field::Caller,
            Field::Callee,
            Field::Signature,
            Field::Output,
            Field::Value,
        ] {
            keys.insert(FieldKey::new(sig.clone(), field));
        }
        for i in 0..event.inputs.len() {
            keys.insert(FieldKey::new(sig.clone(), Field::Input(i)));
        }
    }
    keys
}

/// An event abstracted for matching against automaton labels: variable
/// slots become holes carrying the concrete value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternValue {
    Concrete(Scalar),
    Hole(Scalar),
    Top,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternEvent {
    /// Slots in canonical order (see [`AbstractEvent::slots`]).
    pub slots: Vec<PatternValue>,
    pub status: Status,
}

pub fn pattern(event: &EventRecord, recipe: &Recipe) -> PatternEvent {
    let mut fields = vec![Field::Caller, Field::Callee, Field::Signature];
    fields.extend((0..event.inputs.len()).map(Field::Input));
    fields.extend([Field::Output, Field::Value]);
    let slots = fields
        .into_iter()
        .map(|field| match field_value(event, field) {
            None => PatternValue::Top,
            Some(v) => match recipe.abstraction(&event.signature, field) {
                FieldAbstraction::Identity => PatternValue::Concrete(v),
                FieldAbstraction::Variable => PatternValue::Hole(v),
                FieldAbstraction::Top => PatternValue::Top,
            },
        })
        .collect();
    PatternEvent {
        slots,
        status: event.status,
    }
}
