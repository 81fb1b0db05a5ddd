//! A deterministic generator of small task-oriented dialogue corpora in the
//! MultiWOZ file layout. Used for tests and quick end-to-end runs when the
//! real corpus is not available.
//!
//! Dialogues mix values that are spelled out by the user (reachable by the
//! candidate tracker), values only implied by paraphrase (reachable only by a
//! closed-vocabulary classifier), values offered by the agent, and large open
//! sets such as times whose test values are often unseen in training.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::corpus::{ACTS_FILE, DATA_FILE, DEV_LIST, TEST_LIST};
use crate::slots::DOMAINS;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_dialogues: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_dialogues: 200,
            seed: 0,
        }
    }
}

/// Generated files, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub data: BTreeMap<String, Value>,
    pub acts: BTreeMap<String, Value>,
    pub dev_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

const AREAS: [&str; 5] = ["east", "west", "north", "south", "centre"];
const PRICES: [&str; 3] = ["cheap", "moderate", "expensive"];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const FOODS: [&str; 8] = ["italian", "chinese", "indian", "british", "french", "thai", "korean", "mexican"];
const HOTEL_NAMES: [&str; 8] = [
    "acorn guest house",
    "alpha-milton guest house",
    "ashley hotel",
    "bridge guest house",
    "city centre north",
    "el shaddai",
    "gonville hotel",
    "lovell lodge",
];
const RESTAURANT_NAMES: [&str; 8] = [
    "pizza hut city centre",
    "the golden wok",
    "curry garden",
    "la margherita",
    "the copper kettle",
    "nandos",
    "sala thong",
    "royal spice",
];
const ATTRACTION_NAMES: [&str; 6] = [
    "kings college",
    "the fitzwilliam museum",
    "christ's college",
    "cambridge punter",
    "all saints church",
    "byard art",
];
const ATTRACTION_TYPES: [&str; 5] = ["museum", "college", "church", "boat", "theatre"];
const STATIONS: [&str; 6] = [
    "london kings cross",
    "ely",
    "norwich",
    "stansted airport",
    "peterborough",
    "birmingham new street",
];
const DEPARTMENTS: [&str; 4] = ["cardiology", "neurology", "paediatrics", "oncology"];

/// Paraphrases that never contain the annotated value itself.
const PRICE_PARAPHRASE: [(&str, &str); 3] = [
    ("cheap", "something that will not cost much"),
    ("moderate", "something in the middle price wise"),
    ("expensive", "somewhere really fancy"),
];

fn time(rng: &mut ChaCha8Rng) -> String {
    let hour = rng.gen_range(6..23);
    let minute = [0, 15, 30, 45][rng.gen_range(0..4)];
    format!("{hour:02}:{minute:02}")
}

fn pick<'a>(rng: &mut ChaCha8Rng, values: &[&'a str]) -> &'a str {
    values[rng.gen_range(0..values.len())]
}

/// Which metadata part a slot's value is stored under.
fn part(slot: &str) -> &'static str {
    match slot {
        "people" | "day" | "stay" | "time" => "book",
        _ => "semi",
    }
}

/// One user utterance with the slots it sets and the agent reply that follows.
struct Exchange {
    user: String,
    updates: Vec<(&'static str, &'static str, String)>,
    agent: String,
    acts: Vec<(String, String)>,
}

struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    fn hotel(&mut self) -> Vec<Exchange> {
        let rng = &mut self.rng;
        let area = pick(rng, &AREAS);
        let price = pick(rng, &PRICES);
        let name = pick(rng, &HOTEL_NAMES);
        let mut out = Vec::new();

        let (area_text, area_value) = if rng.gen_bool(0.15) {
            ("any area is fine".to_string(), "dontcare".to_string())
        } else {
            (format!("in the {area}"), area.to_string())
        };
        let kind = if rng.gen_bool(0.5) { "hotel" } else { "guesthouse" };
        out.push(Exchange {
            user: format!("i am looking for a {kind} {area_text}"),
            updates: vec![("hotel", "type", kind.into()), ("hotel", "area", area_value)],
            agent: "what price range would you like ?".into(),
            acts: vec![("Hotel-Request".into(), "Price".into())],
        });

        let price_text = if rng.gen_bool(0.3) {
            PRICE_PARAPHRASE.iter().find(|(v, _)| *v == price).unwrap().1.to_string()
        } else {
            format!("a {price} one please")
        };
        let mut updates = vec![("hotel", "pricerange", price.to_string())];
        let mut user = price_text;
        if rng.gen_bool(0.5) {
            user.push_str(" , with free parking");
            updates.push(("hotel", "parking", "yes".into()));
        }
        if rng.gen_bool(0.4) {
            user.push_str(" and wifi");
            updates.push(("hotel", "internet", "yes".into()));
        }
        out.push(Exchange {
            user,
            updates,
            agent: format!("how about the {name} ?"),
            acts: vec![("Hotel-Inform".into(), "Name".into())],
        });

        if rng.gen_bool(0.7) {
            let people = rng.gen_range(1..7).to_string();
            let stay = rng.gen_range(1..5).to_string();
            let day = pick(rng, &DAYS);
            out.push(Exchange {
                user: format!("that sounds good . book it for {people} people for {stay} nights starting {day}"),
                updates: vec![
                    ("hotel", "name", name.into()),
                    ("hotel", "people", people),
                    ("hotel", "stay", stay),
                    ("hotel", "day", day.into()),
                ],
                agent: "booking was successful . anything else ?".into(),
                acts: vec![("Booking-Book".into(), "Ref".into()), ("general-reqmore".into(), "none".into())],
            });
        }
        out
    }

    fn restaurant(&mut self) -> Vec<Exchange> {
        let rng = &mut self.rng;
        let food = pick(rng, &FOODS);
        let area = pick(rng, &AREAS);
        let price = pick(rng, &PRICES);
        let name = pick(rng, &RESTAURANT_NAMES);
        let mut out = vec![Exchange {
            user: format!("i want to eat {food} food in the {area}"),
            updates: vec![("restaurant", "food", food.into()), ("restaurant", "area", area.into())],
            agent: "do you have a price range in mind ?".into(),
            acts: vec![("Restaurant-Request".into(), "Price".into())],
        }];
        let price_value = if rng.gen_bool(0.15) { "dontcare" } else { price };
        let price_text = if price_value == "dontcare" {
            "i don't mind about the price".to_string()
        } else {
            format!("{price} please")
        };
        out.push(Exchange {
            user: price_text,
            updates: vec![("restaurant", "pricerange", price_value.into())],
            agent: format!("i recommend {name} . shall i book a table ?"),
            acts: vec![("Restaurant-Recommend".into(), "Name".into())],
        });
        if rng.gen_bool(0.7) {
            let people = rng.gen_range(1..7).to_string();
            let day = pick(rng, &DAYS);
            let at = time(rng);
            out.push(Exchange {
                user: format!("yes , a table for {people} on {day} at {at}"),
                updates: vec![
                    ("restaurant", "name", name.into()),
                    ("restaurant", "people", people),
                    ("restaurant", "day", day.into()),
                    ("restaurant", "time", at),
                ],
                agent: "you are booked . is there anything else ?".into(),
                acts: vec![("Booking-Book".into(), "Ref".into())],
            });
        }
        out
    }

    fn attraction(&mut self) -> Vec<Exchange> {
        let rng = &mut self.rng;
        let kind = pick(rng, &ATTRACTION_TYPES);
        let area = pick(rng, &AREAS);
        let name = pick(rng, &ATTRACTION_NAMES);
        vec![
            Exchange {
                user: format!("can you suggest a {kind} to visit in the {area} ?"),
                updates: vec![("attraction", "type", kind.into()), ("attraction", "area", area.into())],
                agent: format!("{name} is a nice one"),
                acts: vec![("Attraction-Inform".into(), "Name".into())],
            },
            Exchange {
                user: format!("great , what is the postcode of {name} ?"),
                updates: vec![("attraction", "name", name.into())],
                agent: "the postcode is cb2 1rf".into(),
                acts: vec![("Attraction-Inform".into(), "Post".into())],
            },
        ]
    }

    fn train(&mut self) -> Vec<Exchange> {
        let rng = &mut self.rng;
        let dest = pick(rng, &STATIONS);
        let day = pick(rng, &DAYS);
        let from_text = if rng.gen_bool(0.3) { "leaving town" } else { "from cambridge" };
        let mut out = vec![Exchange {
            user: format!("i need a train {from_text} to {dest} on {day}"),
            updates: vec![
                ("train", "departure", "cambridge".into()),
                ("train", "destination", dest.into()),
                ("train", "day", day.into()),
            ],
            agent: "what time do you want to leave ?".into(),
            acts: vec![("Train-Request".into(), "Leave".into())],
        }];
        let at = time(rng);
        let (text, slot) = if rng.gen_bool(0.5) {
            (format!("after {at}"), "leaveAt")
        } else {
            (format!("i want to arrive by {at}"), "arriveBy")
        };
        out.push(Exchange {
            user: text,
            updates: vec![("train", slot, at)],
            agent: "how many tickets ?".into(),
            acts: vec![("Train-Request".into(), "People".into())],
        });
        if rng.gen_bool(0.6) {
            let people = rng.gen_range(1..7).to_string();
            out.push(Exchange {
                user: format!("{people} tickets please"),
                updates: vec![("train", "people", people)],
                agent: "booked . anything else ?".into(),
                acts: vec![("Train-OfferBooked".into(), "Ref".into())],
            });
        }
        out
    }

    fn taxi(&mut self) -> Vec<Exchange> {
        let rng = &mut self.rng;
        let from = pick(rng, &HOTEL_NAMES);
        let to = pick(rng, &RESTAURANT_NAMES);
        let at = time(rng);
        let (text, slot) = if rng.gen_bool(0.5) {
            (format!("leave after {at}"), "leaveAt")
        } else {
            (format!("arrive by {at}"), "arriveBy")
        };
        vec![
            Exchange {
                user: format!("i also need a taxi from {from} to {to}"),
                updates: vec![("taxi", "departure", from.into()), ("taxi", "destination", to.into())],
                agent: "when would you like to travel ?".into(),
                acts: vec![("Taxi-Request".into(), "Leave".into())],
            },
            Exchange {
                user: format!("i want to {text}"),
                updates: vec![("taxi", slot, at)],
                agent: "your taxi is booked".into(),
                acts: vec![("Taxi-Inform".into(), "Car".into())],
            },
        ]
    }

    fn hospital(&mut self) -> Vec<Exchange> {
        let dept = pick(&mut self.rng, &DEPARTMENTS);
        vec![Exchange {
            user: format!("where is the {dept} department of the hospital ?"),
            updates: vec![("hospital", "department", dept.into())],
            agent: "it is on hills road".into(),
            acts: vec![("Hospital-Inform".into(), "Addr".into())],
        }]
    }

    fn dialogue(&mut self) -> (Value, Value) {
        let mut plan: Vec<&str> = Vec::new();
        let first = ["hotel", "restaurant", "attraction", "train", "hospital"];
        plan.push(pick(&mut self.rng, &first));
        if plan[0] != "hospital" && self.rng.gen_bool(0.6) {
            let second: Vec<&str> = ["hotel", "restaurant", "attraction", "train", "taxi"]
                .into_iter()
                .filter(|d| *d != plan[0])
                .collect();
            plan.push(pick(&mut self.rng, &second));
        }

        let mut exchanges = Vec::new();
        if self.rng.gen_bool(0.5) {
            exchanges.push(Exchange {
                user: "hello , i need some help planning my trip".into(),
                updates: Vec::new(),
                agent: "sure , what can i help you with ?".into(),
                acts: vec![("general-greet".into(), "none".into())],
            });
        }
        for domain in plan {
            exchanges.extend(match domain {
                "hotel" => self.hotel(),
                "restaurant" => self.restaurant(),
                "attraction" => self.attraction(),
                "train" => self.train(),
                "taxi" => self.taxi(),
                _ => self.hospital(),
            });
        }
        if let Some(last) = exchanges.last_mut() {
            last.agent = "you are welcome . goodbye".into();
            last.acts = vec![("general-bye".into(), "none".into())];
        }

        let mut state: BTreeMap<(&str, &str), String> = BTreeMap::new();
        let mut log = Vec::new();
        let mut acts = Map::new();
        for (i, ex) in exchanges.into_iter().enumerate() {
            for (d, s, v) in ex.updates {
                state.insert((d, s), v);
            }
            log.push(json!({"text": ex.user, "metadata": {}}));
            log.push(json!({"text": ex.agent, "metadata": metadata(&state)}));
            let mut turn_acts: BTreeMap<String, Vec<Value>> = BTreeMap::new();
            for (act, slot) in ex.acts {
                turn_acts.entry(act).or_default().push(json!([slot, "?"]));
            }
            acts.insert((i + 1).to_string(), json!(turn_acts));
        }
        (json!({"goal": {}, "log": log}), Value::Object(acts))
    }
}

fn metadata(state: &BTreeMap<(&str, &str), String>) -> Value {
    let mut meta = Map::new();
    for domain in DOMAINS {
        let mut semi = Map::new();
        let mut book = Map::new();
        for (&(d, s), v) in state.iter() {
            if d == domain {
                let target = if part(s) == "book" { &mut book } else { &mut semi };
                target.insert(s.to_string(), json!(v));
            }
        }
        book.insert("booked".into(), json!([]));
        meta.insert(domain.to_string(), json!({"semi": semi, "book": book}));
    }
    Value::Object(meta)
}

/// Generates `config.n_dialogues` dialogues; every tenth goes to dev and the
/// one after it to test.
pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    let mut generator = Generator {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    let mut out = SyntheticCorpus {
        data: BTreeMap::new(),
        acts: BTreeMap::new(),
        dev_ids: Vec::new(),
        test_ids: Vec::new(),
    };
    let mut ids: Vec<usize> = (0..config.n_dialogues).collect();
    ids.shuffle(&mut generator.rng);
    for (n, i) in ids.into_iter().enumerate() {
        let id = format!("SYN{i:05}");
        let (dialogue, acts) = generator.dialogue();
        match n % 10 {
            0 => out.dev_ids.push(format!("{id}.json")),
            1 => out.test_ids.push(format!("{id}.json")),
            _ => {}
        }
        out.data.insert(format!("{id}.json"), dialogue);
        out.acts.insert(id, acts);
    }
    out.dev_ids.sort();
    out.test_ids.sort();
    out
}

pub fn write_synthetic(dir: &Path, config: &SyntheticConfig) -> io::Result<()> {
    let corpus = generate(config);
    fs::create_dir_all(dir)?;
    fs::write(dir.join(DATA_FILE), serde_json::to_vec(&corpus.data)?)?;
    fs::write(dir.join(ACTS_FILE), serde_json::to_vec(&corpus.acts)?)?;
    fs::write(dir.join(DEV_LIST), corpus.dev_ids.join("\n") + "\n")?;
    fs::write(dir.join(TEST_LIST), corpus.test_ids.join("\n") + "\n")?;
    Ok(())
}
