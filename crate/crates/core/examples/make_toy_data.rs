//! Regenerates the bundled toy datasets under `data/toy/`.
//!
//! `cargo run -p fewshot-bench --example make_toy_data -- data/toy`

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use fewshot_bench::corpus::{
    write_examples, DatasetSpec, LabeledExample, Phase, TaskFormat, TransferType,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: &[&str] = &[
    "Ada", "Bruno", "Chen", "Dalia", "Emeka", "Farah", "Goran", "Hana", "Ivo", "Jun",
];
const PLACES: &[&str] = &[
    "Oslo", "Lagos", "Lima", "Hanoi", "Quito", "Perth", "Turin", "Izmir", "Cork", "Pune",
];
const ORGS: &[&str] = &[
    "Acme", "Globex", "Initech", "Umbrella", "Vandelay", "Wonka", "Stark", "Tyrell",
];
const PRODUCTS: &[&str] = &["Zephyr", "Quasar", "Nimbus", "Falcon", "Orbit", "Prism"];

fn topic_words(label: &str) -> &'static [&'static str] {
    match label {
        "business" => &["merger", "quarterly", "revenue", "retailer", "shareholders"],
        "technology" => &["software", "chip", "startup", "browser", "encryption"],
        "sports" => &["league", "striker", "tournament", "coach", "final"],
        "politics" => &["senate", "election", "minister", "coalition", "ballot"],
        "science" => &["telescope", "genome", "particle", "fossil", "climate"],
        "health" => &["vaccine", "clinic", "nutrition", "surgery", "therapy"],
        "education" => &["campus", "curriculum", "teachers", "exam", "scholarship"],
        "travel" => &["airline", "resort", "itinerary", "passport", "cruise"],
        "music" => &["album", "concert", "guitarist", "chorus", "festival"],
        "food" => &["recipe", "bakery", "harvest", "chef", "spices"],
        "weather" => &["storm", "forecast", "humidity", "drought", "frost"],
        "arts" => &["gallery", "sculpture", "novelist", "theatre", "mural"],
        _ => &["thing"],
    }
}

fn spec(
    id: &str,
    format: TaskFormat,
    transfer: &[TransferType],
    train: &[&str],
    val: &[&str],
    test: &[&str],
) -> DatasetSpec {
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    DatasetSpec {
        dataset_id: id.into(),
        task_format: format,
        transfer_types: transfer.iter().copied().collect::<BTreeSet<_>>(),
        phase: Phase::MetaTest,
        labels_train: owned(train),
        labels_val: owned(val),
        labels_test: owned(test),
        expected_test_example_count: None,
        label_verbalizers: BTreeMap::new(),
    }
}

fn example(id: String, text_a: String, label: &str) -> LabeledExample {
    LabeledExample {
        example_id: id,
        text_a,
        text_b: None,
        mention_spans: None,
        label: label.into(),
    }
}

fn char_span(text: &str, needle: &str, from_byte: usize) -> (usize, usize) {
    let byte = from_byte + text[from_byte..].find(needle).expect("needle inserted");
    let start = text[..byte].chars().count();
    (start, start + needle.chars().count())
}

fn topics(rng: &mut ChaCha8Rng) -> (DatasetSpec, Vec<LabeledExample>) {
    let test = [
        "business",
        "technology",
        "sports",
        "politics",
        "science",
        "health",
        "education",
        "travel",
    ];
    let s = spec(
        "toy_topics",
        TaskFormat::SingleText,
        &[TransferType::Class],
        &["music", "food", "arts"],
        &["weather"],
        &test,
    );
    let mut rows = Vec::new();
    for label in test {
        for i in 0..60 {
            let words = topic_words(label);
            let a = words.choose(rng).unwrap();
            let b = words.choose(rng).unwrap();
            let who = NAMES.choose(rng).unwrap();
            let text = format!(
                "{who} wrote about the {a} and the {b} in a report from {}.",
                PLACES.choose(rng).unwrap()
            );
            rows.push(example(format!("{label}-{i:03}"), text, label));
        }
    }
    (s, rows)
}

fn reviews(rng: &mut ChaCha8Rng) -> (DatasetSpec, Vec<LabeledExample>) {
    let s = spec(
        "toy_reviews",
        TaskFormat::SingleText,
        &[TransferType::Domain],
        &[],
        &[],
        &["positive", "negative"],
    );
    let good = ["loved", "enjoyed", "admired", "recommend"];
    let bad = ["hated", "regretted", "returned", "avoid"];
    let mut rows = Vec::new();
    for (label, verbs) in [("positive", good), ("negative", bad)] {
        for i in 0..80 {
            let text = format!(
                "I {} the {} {} I bought in {}.",
                verbs.choose(rng).unwrap(),
                PRODUCTS.choose(rng).unwrap(),
                ["phone", "kettle", "lamp", "bike"].choose(rng).unwrap(),
                PLACES.choose(rng).unwrap()
            );
            rows.push(example(format!("{label}-{i:03}"), text, label));
        }
    }
    (s, rows)
}

fn nli(rng: &mut ChaCha8Rng) -> (DatasetSpec, Vec<LabeledExample>) {
    let mut s = spec(
        "toy_nli",
        TaskFormat::SentencePair,
        &[TransferType::Domain],
        &[],
        &[],
        &["entailment", "neutral", "contradiction"],
    );
    s.label_verbalizers = BTreeMap::from([
        ("entailment".into(), "Yes".into()),
        ("contradiction".into(), "No".into()),
        ("neutral".into(), "Maybe".into()),
    ]);
    let mut rows = Vec::new();
    for label in ["entailment", "neutral", "contradiction"] {
        for i in 0..80 {
            let who = NAMES.choose(rng).unwrap();
            let place = PLACES.choose(rng).unwrap();
            let premise = format!("{who} is walking through the market in {place}.");
            let hypothesis = match label {
                "entailment" => format!("{who} is outdoors"),
                "neutral" => format!("{who} is buying fruit"),
                _ => format!("{who} is asleep at home"),
            };
            let mut row = example(format!("{label}-{i:03}"), premise, label);
            row.text_b = Some(hypothesis);
            rows.push(row);
        }
    }
    (s, rows)
}

fn relations(rng: &mut ChaCha8Rng) -> (DatasetSpec, Vec<LabeledExample>) {
    let labels = [
        "founded_by",
        "employee_of",
        "born_in",
        "located_in",
        "spouse_of",
    ];
    let s = spec(
        "toy_relations",
        TaskFormat::RelationClassification,
        &[TransferType::Task],
        &[],
        &[],
        &labels,
    );
    let mut rows = Vec::new();
    for label in labels {
        for i in 0..40 {
            let who = *NAMES.choose(rng).unwrap();
            let org = *ORGS.choose(rng).unwrap();
            let place = *PLACES.choose(rng).unwrap();
            let other = NAMES[(NAMES.iter().position(|n| *n == who).unwrap()
                + 1
                + rng.random_range(0..NAMES.len() - 1))
                % NAMES.len()];
            let (text, first, second) = match label {
                "founded_by" => (format!("{org} was started by {who} years ago."), org, who),
                "employee_of" => (format!("{who} has worked at {org} since spring."), who, org),
                "born_in" => (
                    format!("{who} grew up near the port of {place}."),
                    who,
                    place,
                ),
                "located_in" => (
                    format!("The offices of {org} sit in central {place}."),
                    org,
                    place,
                ),
                _ => (
                    format!("{who} and {other} celebrated their wedding."),
                    who,
                    other,
                ),
            };
            let a = char_span(&text, first, 0);
            let b_from = text.find(first).unwrap() + first.len();
            let b = char_span(&text, second, b_from);
            let mut row = example(format!("{label}-{i:03}"), text, label);
            row.mention_spans = Some(vec![a, b]);
            rows.push(row);
        }
    }
    (s, rows)
}

fn entities(rng: &mut ChaCha8Rng) -> (DatasetSpec, Vec<LabeledExample>) {
    let labels = ["person", "location", "organization", "product"];
    let s = spec(
        "toy_entities",
        TaskFormat::EntityTyping,
        &[TransferType::Pretraining],
        &[],
        &[],
        &labels,
    );
    let mut rows = Vec::new();
    for label in labels {
        for i in 0..45 {
            let mention = match label {
                "person" => NAMES.choose(rng).unwrap(),
                "location" => PLACES.choose(rng).unwrap(),
                "organization" => ORGS.choose(rng).unwrap(),
                _ => PRODUCTS.choose(rng).unwrap(),
            };
            let frame = [
                "Reports about {} spread quickly.",
                "Everyone mentioned {} at lunch.",
                "The article on {} was short.",
            ]
            .choose(rng)
            .unwrap();
            let text = frame.replace("{}", mention);
            let span = char_span(&text, mention, 0);
            let mut row = example(format!("{label}-{i:03}"), text, label);
            row.mention_spans = Some(vec![span]);
            rows.push(row);
        }
    }
    (s, rows)
}

type Builder = fn(&mut ChaCha8Rng) -> (DatasetSpec, Vec<LabeledExample>);

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "data/toy".into());
    let out = Path::new(&out);
    fs::create_dir_all(out).expect("output directory");
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let builders: [Builder; 5] = [topics, reviews, nli, relations, entities];
    for build in builders {
        let (spec, rows) = build(&mut rng);
        spec.validate().expect("generated spec is valid");
        let spec_path = out.join(format!("{}.json", spec.dataset_id));
        fs::write(
            &spec_path,
            serde_json::to_string_pretty(&spec).unwrap() + "\n",
        )
        .unwrap();
        let data =
            BufWriter::new(File::create(out.join(format!("{}.jsonl", spec.dataset_id))).unwrap());
        write_examples(&rows, data).unwrap();
        println!("{}: {} examples", spec.dataset_id, rows.len());
    }
}
