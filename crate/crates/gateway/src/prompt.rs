//! Prompt rendering for the forward gamble tasks and the pairwise inverse task.
//!
//! Every random presentation choice (which gamble is shown as Machine A, the
//! order of the two decisions, option and item order, and the names given to
//! items) is drawn from a ChaCha stream seeded by [`PromptSpec::seed`], and
//! returned alongside the text so a run can be replayed and verdicts mapped
//! back to the underlying structures.

use std::fmt;
use std::str::FromStr;

use choicekit_core::choice::{ChoiceProblem, Gamble};
use choicekit_core::inverse::{Context, DecisionStructure, Item, ItemSet, N_ITEMS, TARGET};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("task `{0}` is not a forward task")]
    NotForward(Task),
    #[error("task `{0}` is not the inverse task")]
    NotInverse(Task),
    #[error("the inverse task needs a context")]
    MissingContext,
    #[error("forward tasks take no context")]
    UnexpectedContext,
    #[error("decision {0} is invalid: {1}")]
    InvalidDecision(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Task 1: predict one person's choice.
    PredictIndividual,
    /// Task 2: predict the share of people choosing each machine.
    PredictProportion,
    /// Task 3: choose as a participant.
    ActAsParticipant,
    InversePairwise,
}

impl Task {
    pub fn id(self) -> &'static str {
        match self {
            Self::PredictIndividual => "predict-individual",
            Self::PredictProportion => "predict-proportion",
            Self::ActAsParticipant => "act-as-participant",
            Self::InversePairwise => "inverse-pairwise",
        }
    }

    pub fn is_forward(self) -> bool {
        self != Self::InversePairwise
    }

    /// Forward task by its number (1, 2 or 3).
    pub fn forward(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::PredictIndividual),
            2 => Some(Self::PredictProportion),
            3 => Some(Self::ActAsParticipant),
            _ => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Task {
    type Err = String;

    /// Accepts ids and the forward task numbers `1`, `2`, `3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(t) = s.parse::<u8>().ok().and_then(Self::forward) {
            return Ok(t);
        }
        [
            Self::PredictIndividual,
            Self::PredictProportion,
            Self::ActAsParticipant,
            Self::InversePairwise,
        ]
        .into_iter()
        .find(|t| t.id() == s)
        .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    #[default]
    ZeroShot,
    ChainOfThought,
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-shot" => Ok(Self::ZeroShot),
            "chain-of-thought" | "cot" => Ok(Self::ChainOfThought),
            _ => Err(format!("unknown style `{s}`")),
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ZeroShot => "zero-shot",
            Self::ChainOfThought => "chain-of-thought",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub task: Task,
    pub style: Style,
    /// Replaces "A person" / "people" in forward templates.
    pub persona: Option<String>,
    pub context: Option<Context>,
    pub seed: u64,
}

impl PromptSpec {
    pub fn forward(task: Task, style: Style, seed: u64) -> Self {
        Self {
            task,
            style,
            persona: None,
            context: None,
            seed,
        }
    }

    pub fn inverse(context: Context, style: Style, seed: u64) -> Self {
        Self {
            task: Task::InversePairwise,
            style,
            persona: None,
            context: Some(context),
            seed,
        }
    }

    pub fn with_persona(mut self, persona: impl Into<String>) -> Self {
        self.persona = Some(persona.into());
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match (self.task.is_forward(), self.context) {
            (true, Some(_)) => Err(PromptError::UnexpectedContext),
            (false, None) => Err(PromptError::MissingContext),
            _ => Ok(()),
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn fmt_number(x: f64) -> String {
    format!("{x:.1}")
}

/// "$10.0 with 50.0% chance, $0.0 with 50.0% chance."
pub fn describe_gamble(g: &Gamble) -> String {
    let parts: Vec<String> = g
        .outcomes()
        .map(|(x, p)| {
            let money = if x < 0.0 {
                format!("-${}", fmt_number(-x))
            } else {
                format!("${}", fmt_number(x))
            };
            format!("{money} with {}% chance", fmt_number(100.0 * p))
        })
        .collect();
    format!("{}.", parts.join(", "))
}

/// A rendered forward prompt and the presentation it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedForward {
    pub text: String,
    /// True when the problem's gamble B was shown as Machine A.
    pub swapped: bool,
    /// The problem as presented (Machine A first).
    pub shown: ChoiceProblem,
}

impl RenderedForward {
    /// Maps a verdict about the shown machines back to the original problem.
    pub fn original_choice(&self, shown_a: bool) -> bool {
        shown_a != self.swapped
    }

    /// Maps a shown P(Machine A) back to P(original gamble A).
    pub fn original_prob(&self, shown_p_a: f64) -> f64 {
        if self.swapped {
            1.0 - shown_p_a
        } else {
            shown_p_a
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn forward_body(task: Task, style: Style, persona: Option<&str>, people: u32, a: &str, b: &str) -> String {
    let bonus = "A fixed proportion of 10% of this value will be paid to the \nparticipant as a performance bonus.";
    match task {
        Task::PredictIndividual => {
            let who = persona.map(capitalize).unwrap_or_else(|| "A person".to_string());
            let tail = match style {
                Style::ZeroShot => "Do not provide any explanation, only answer with A or B:",
                Style::ChainOfThought => "Let's think step by step before answering with A or B:",
            };
            format!(
                "{who} is presented with two gambling machines, and makes a choice between the machines with the goal of maximizing the \
                 \namount of dollars received. \n\nThe person will get one reward from the machine they choose. {bonus} \
                 \nIf the reward is negative, their bonus is set to $0. \n\nMachine A: {a} \nMachine B: {b} \n\n\
                 Which machine does the person choose? \n{tail}"
            )
        }
        Task::PredictProportion => {
            let who = match persona {
                Some(p) => format!("{people} {p}"),
                None => format!("{people} people"),
            };
            let tail = match style {
                Style::ZeroShot => {
                    "Please only provide the percentage of people who choose Machine A and Machine B in the json format."
                }
                Style::ChainOfThought => {
                    "Let's think step by step before providing the final output. \nPlease provide the percentage of people who choose Machine A and Machine B in the json format."
                }
            };
            format!(
                "{who} are presented with two gambling machines, and each person makes a choice between the machines with the goal of \
                 \nmaximizing the amount of dollars received. \nEach person will get one reward from the machine they choose. {bonus} \
                 \nIf the reward is negative, their bonus is set to $0. \n\nMachine A: {a} \nMachine B: {b} \n\n\
                 How many people choose Machine A?\nHow many people choose Machine B? \n\n{tail}"
            )
        }
        Task::ActAsParticipant => {
            let tail = match style {
                Style::ZeroShot => "Do not provide any explanation, only answer with A or B:",
                Style::ChainOfThought => "Let's think step by step before answering with A or B:",
            };
            let intro = match persona {
                Some(p) => format!("You are {p}. There are two gambling machines, A and B."),
                None => "There are two gambling machines, A and B.".to_string(),
            };
            format!(
                "{intro} You need to make a choice between the machines with the goal of maximizing the \
                 \namount of dollars received. \nYou will get one reward from the machine that you choose. A fixed proportion of 10% of this value will be paid to you as a \
                 \nperformance bonus. \nIf the reward is negative, your bonus is set to $0.\n\nMachine A: {a} \nMachine B: {b}\n\n\
                 Which machine do you choose?\n{tail}"
            )
        }
        Task::InversePairwise => unreachable!("checked by caller"),
    }
}

/// Renders a forward-task prompt. `people` is the group size quoted by the
/// proportion task.
pub fn render_forward_prompt(p: &ChoiceProblem, spec: &PromptSpec, people: u32) -> Result<RenderedForward, PromptError> {
    if !spec.task.is_forward() {
        return Err(PromptError::NotForward(spec.task));
    }
    spec.validate()?;
    let swapped = spec.rng().random::<bool>();
    let shown = if swapped { p.swapped() } else { p.clone() };
    let text = forward_body(
        spec.task,
        spec.style,
        spec.persona.as_deref(),
        people,
        &describe_gamble(&shown.gamble_a),
        &describe_gamble(&shown.gamble_b),
    );
    Ok(RenderedForward { text, swapped, shown })
}

const CANDY_COLORS: [&str; 10] = [
    "red", "brown", "yellow", "blue", "black", "green", "orange", "purple", "white", "pink",
];

/// How one decision of the pair was laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLayout {
    /// `order[k]` is the original option index shown as bag `k + 1`.
    pub order: Vec<usize>,
    /// The decision as shown: options reordered, items reordered.
    pub shown: DecisionStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedInverse {
    pub text: String,
    /// True when the second decision of the input pair is shown as Choice 1.
    pub pair_swapped: bool,
    /// Display name per item, indexed A, B, C, D, X.
    pub labels: Vec<String>,
    /// Layouts of Choice 1 and Choice 2, in display order.
    pub layouts: [DecisionLayout; 2],
}

impl RenderedInverse {
    /// True if "Choice 1" refers to the first decision of the input pair.
    pub fn choice_one_is_first(&self) -> bool {
        !self.pair_swapped
    }
}

fn item_labels(context: Context, rng: &mut ChaCha8Rng) -> Vec<String> {
    match context {
        Context::Positive => {
            let mut colors = CANDY_COLORS.to_vec();
            colors.shuffle(rng);
            colors[..N_ITEMS].iter().map(|c| c.to_string()).collect()
        }
        Context::Negative => {
            let mut numbers: Vec<u32> = (1..=9).collect();
            numbers.shuffle(rng);
            numbers[..N_ITEMS].iter().map(|n| n.to_string()).collect()
        }
    }
}

fn layout(d: &DecisionStructure, rng: &mut ChaCha8Rng) -> DecisionLayout {
    let mut order: Vec<usize> = (0..d.options.len()).collect();
    order.shuffle(rng);
    let options = order
        .iter()
        .map(|&k| {
            let mut items: Vec<Item> = d.options[k].items().to_vec();
            items.shuffle(rng);
            ItemSet::new(items)
        })
        .collect();
    let chosen = order.iter().position(|&k| k == d.chosen).expect("chosen is a valid index");
    DecisionLayout {
        order,
        shown: DecisionStructure { options, chosen },
    }
}

fn describe_decision(n: usize, d: &DecisionStructure, labels: &[String], context: Context) -> String {
    let (container, plural) = match context {
        Context::Positive => ("Bag", "bags"),
        Context::Negative => ("Set", "sets"),
    };
    let mut out = format!("Choice {n} was made between the following {plural}:\n");
    for (k, o) in d.options.iter().enumerate() {
        let names: Vec<&str> = o.items().iter().map(|i| labels[i.index()].as_str()).collect();
        out.push_str(&format!("{container} {}: {}.\n", k + 1, names.join(", ")));
    }
    out.push_str(&format!(
        "\nThe person making the choice chose {container} {}.\n",
        d.chosen + 1
    ));
    out
}

/// Renders a pairwise inverse prompt for `(first, second)`.
pub fn render_inverse_prompt(
    pair: (&DecisionStructure, &DecisionStructure),
    spec: &PromptSpec,
) -> Result<RenderedInverse, PromptError> {
    if spec.task != Task::InversePairwise {
        return Err(PromptError::NotInverse(spec.task));
    }
    let context = spec.context.ok_or(PromptError::MissingContext)?;
    for (k, d) in [pair.0, pair.1].into_iter().enumerate() {
        d.validate()
            .map_err(|e| PromptError::InvalidDecision(k + 1, e.to_string()))?;
    }
    let mut rng = spec.rng();
    let labels = item_labels(context, &mut rng);
    let pair_swapped = rng.random::<bool>();
    let (one, two) = if pair_swapped { (pair.1, pair.0) } else { (pair.0, pair.1) };
    let layouts = [layout(one, &mut rng), layout(two, &mut rng)];

    let target = &labels[TARGET.index()];
    let (intro, clarification, question) = match context {
        Context::Positive => (
            "The following are two choices that people have made between different bags of candy. Each candy is a different color.",
            "People were required to choose among the bags available, and were not allowed to reject all the bags.\nFor example, when there is only one bag, the person has no choice but to choose it.",
            format!("Which choice (1 or 2) more strongly suggests that the person making the choice likes {target} candies?"),
        ),
        Context::Negative => (
            "The following are two choices that people have made between different sets of electric shocks. Each shock is labeled with a different number.",
            "People were required to choose among the sets available, and were not allowed to reject all the sets.\nFor example, when there is only one set, the person has no choice but to choose it.",
            format!("Which choice (1 or 2) more strongly suggests that the person making the choice prefers shock {target}?"),
        ),
    };
    let tail = match spec.style {
        Style::ZeroShot => {
            "Please respond with either \"Choice 1\" or \"Choice 2\". Do not include anything else in your answer."
        }
        Style::ChainOfThought => "Let's think step by step.",
    };
    let text = format!(
        "{intro}\n{}\n{}\n{clarification}\n{question}\n{tail}",
        describe_decision(1, &layouts[0].shown, &labels, context),
        describe_decision(2, &layouts[1].shown, &labels, context),
    );
    Ok(RenderedInverse {
        text,
        pair_swapped,
        labels,
        layouts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use choicekit_core::inverse::catalog_47;
    use proptest::prelude::*;

    fn classic() -> ChoiceProblem {
        ChoiceProblem::new(
            "p",
            Gamble::certain(6.0),
            Gamble::new(vec![10.0, 0.0], vec![0.5, 0.5]).unwrap(),
        )
    }

    #[test]
    fn describes_machines() {
        let g = Gamble::new(vec![10.0, -2.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(describe_gamble(&g), "$10.0 with 50.0% chance, -$2.5 with 50.0% chance.");
    }

    #[test]
    fn forward_templates() {
        let p = classic();
        let t1 = render_forward_prompt(&p, &PromptSpec::forward(Task::PredictIndividual, Style::ZeroShot, 1), 20)
            .unwrap();
        assert!(t1.text.starts_with("A person is presented"));
        assert!(t1.text.ends_with("only answer with A or B:"));
        assert!(t1.text.contains("10% of this value"));
        let t3 = render_forward_prompt(&p, &PromptSpec::forward(Task::ActAsParticipant, Style::ChainOfThought, 1), 20)
            .unwrap();
        assert!(t3.text.contains("Which machine do you choose?"));
        assert!(t3.text.ends_with("Let's think step by step before answering with A or B:"));
        let t2 = render_forward_prompt(&p, &PromptSpec::forward(Task::PredictProportion, Style::ZeroShot, 1), 27)
            .unwrap();
        assert!(t2.text.starts_with("27 people are presented"));
        assert!(t2.text.ends_with("in the json format."));
        let inv = PromptSpec::inverse(Context::Positive, Style::ZeroShot, 0);
        assert_eq!(
            render_forward_prompt(&p, &inv, 1),
            Err(PromptError::NotForward(Task::InversePairwise))
        );
    }

    #[test]
    fn persona_replaces_the_subject() {
        let spec = PromptSpec::forward(Task::PredictIndividual, Style::ZeroShot, 3).with_persona("a monkey");
        let r = render_forward_prompt(&classic(), &spec, 20).unwrap();
        assert!(r.text.starts_with("A monkey is presented"));
    }

    #[test]
    fn swap_is_a_permutation() {
        let p = classic();
        let mut seen = [false, false];
        for seed in 0..20 {
            let spec = PromptSpec::forward(Task::PredictIndividual, Style::ZeroShot, seed);
            let r = render_forward_prompt(&p, &spec, 20).unwrap();
            seen[r.swapped as usize] = true;
            let (a, b) = (describe_gamble(&p.gamble_a), describe_gamble(&p.gamble_b));
            let (first, second) = if r.swapped { (&b, &a) } else { (&a, &b) };
            assert!(r.text.contains(&format!("Machine A: {first}")));
            assert!(r.text.contains(&format!("Machine B: {second}")));
            assert_eq!(r.original_choice(true), !r.swapped);
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn inverse_templates() {
        let cat = catalog_47();
        let spec = PromptSpec::inverse(Context::Positive, Style::ZeroShot, 9);
        let r = render_inverse_prompt((&cat[10], &cat[33]), &spec).unwrap();
        assert!(r.text.starts_with("The following are two choices that people have made between different bags of candy."));
        assert!(r.text.contains("not allowed to reject all the bags"));
        assert!(r.text.ends_with("Do not include anything else in your answer."));
        assert!(CANDY_COLORS.contains(&r.labels[TARGET.index()].as_str()));
        assert_eq!(render_inverse_prompt((&cat[10], &cat[33]), &spec).unwrap(), r);

        let cot = PromptSpec::inverse(Context::Negative, Style::ChainOfThought, 9);
        let n = render_inverse_prompt((&cat[10], &cat[33]), &cot).unwrap();
        assert!(n.text.contains("electric shocks"));
        assert!(n.text.ends_with("Let's think step by step."));
        let mut fwd = cot.clone();
        fwd.context = None;
        assert_eq!(render_inverse_prompt((&cat[0], &cat[1]), &fwd), Err(PromptError::MissingContext));
    }

    #[test]
    fn inverse_layout_preserves_decisions() {
        let cat = catalog_47();
        for seed in 0..30 {
            let spec = PromptSpec::inverse(Context::Positive, Style::ZeroShot, seed);
            let (d1, d2) = (&cat[21], &cat[43]);
            let r = render_inverse_prompt((d1, d2), &spec).unwrap();
            let originals = if r.pair_swapped { [d2, d1] } else { [d1, d2] };
            for (lay, orig) in r.layouts.iter().zip(originals) {
                for (k, &o) in lay.order.iter().enumerate() {
                    let mut a: Vec<Item> = lay.shown.options[k].items().to_vec();
                    let mut b: Vec<Item> = orig.options[o].items().to_vec();
                    a.sort();
                    b.sort();
                    assert_eq!(a, b);
                }
                assert_eq!(lay.order[lay.shown.chosen], orig.chosen);
            }
        }
    }

    proptest! {
        #[test]
        fn forward_rendering_is_pure(seed in any::<u64>(), task in 1u8..=3, cot in any::<bool>()) {
            let style = if cot { Style::ChainOfThought } else { Style::ZeroShot };
            let spec = PromptSpec::forward(Task::forward(task).unwrap(), style, seed);
            let a = render_forward_prompt(&classic(), &spec, 25).unwrap();
            let b = render_forward_prompt(&classic(), &spec, 25).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn shuffling_keeps_machine_contents(seed in any::<u64>()) {
            let p = ChoiceProblem::new(
                "q",
                Gamble::new(vec![3.0, -1.0, 7.0], vec![0.2, 0.3, 0.5]).unwrap(),
                Gamble::new(vec![4.0], vec![1.0]).unwrap(),
            );
            let spec = PromptSpec::forward(Task::PredictIndividual, Style::ZeroShot, seed);
            let r = render_forward_prompt(&p, &spec, 25).unwrap();
            let mut shown = [r.shown.gamble_a.clone(), r.shown.gamble_b.clone()];
            if r.swapped {
                shown.reverse();
            }
            prop_assert_eq!(&shown[0], &p.gamble_a);
            prop_assert_eq!(&shown[1], &p.gamble_b);
        }
    }
}
