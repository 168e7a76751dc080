//! Regenerates the bundled toy fixture.
//!
//! cargo run -p entprobe-cli --example make_toy -- [OUT_DIR]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use entprobe::rng::{self, TaskRng};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

const SEED: u64 = 7;

const ONTOLOGY: [(&str, &str, u8); 20] = [
    ("Person", "ROOT", 1),
    ("Place", "ROOT", 1),
    ("Organisation", "ROOT", 1),
    ("Work", "ROOT", 1),
    ("Athlete", "Person", 2),
    ("Artist", "Person", 2),
    ("Settlement", "Place", 2),
    ("Country", "Place", 2),
    ("Company", "Organisation", 2),
    ("SportsTeam", "Organisation", 2),
    ("Film", "Work", 2),
    ("Album", "Work", 2),
    ("SoccerPlayer", "Athlete", 3),
    ("TennisPlayer", "Athlete", 3),
    ("Painter", "Artist", 3),
    ("Musician", "Artist", 3),
    ("City", "Settlement", 3),
    ("Village", "Settlement", 3),
    ("Airline", "Company", 3),
    ("Bank", "Company", 3),
];

const COUNTS: [(&str, usize); 12] = [
    ("SoccerPlayer", 22),
    ("TennisPlayer", 22),
    ("Painter", 22),
    ("Musician", 22),
    ("City", 24),
    ("Village", 16),
    ("Country", 12),
    ("Airline", 12),
    ("Bank", 12),
    ("SportsTeam", 12),
    ("Film", 14),
    ("Album", 14),
];

const FIRST: [&str; 20] = [
    "ana", "bruno", "carla", "dario", "elena", "fabio", "greta", "hugo", "ines", "jonas", "karin",
    "luca", "marta", "nils", "olga", "pavel", "rosa", "sven", "tilda", "umberto",
];
const LAST: [&str; 20] = [
    "alvarez",
    "berg",
    "castro",
    "dahl",
    "eriksen",
    "ferreira",
    "gallo",
    "horvat",
    "ivanov",
    "jansen",
    "kovac",
    "lindqvist",
    "moreau",
    "novak",
    "ortega",
    "petrov",
    "quint",
    "rossi",
    "silva",
    "torres",
];
const SYLLABLES: [&str; 16] = [
    "ka", "vel", "dor", "mi", "sa", "ren", "tho", "li", "bra", "nu", "gan", "esh", "po", "ril",
    "zen", "ta",
];

const HIGH_WORDS: [&str; 7] = ["the", "of", "and", "in", "is", "a", "was"];
const NOISE_WORDS: [&str; 40] = [
    "old", "new", "north", "south", "east", "west", "small", "large", "early", "late", "known",
    "named", "first", "second", "main", "local", "public", "private", "modern", "ancient", "green",
    "blue", "red", "dark", "bright", "quiet", "busy", "rich", "poor", "young", "great", "little",
    "long", "short", "high", "low", "open", "closed", "warm", "cold",
];

/// Mid-frequency vocabulary, each tied to the entity types it describes.
fn topic_groups() -> Vec<(&'static [&'static str], &'static [&'static str])> {
    vec![
        (
            &["match", "season", "coach", "league"],
            &["SoccerPlayer", "TennisPlayer", "SportsTeam"],
        ),
        (
            &["goal", "striker", "stadium"],
            &["SoccerPlayer", "SportsTeam"],
        ),
        (&["racket", "tournament"], &["TennisPlayer"]),
        (
            &["gallery", "studio", "exhibition"],
            &["Painter", "Musician"],
        ),
        (&["canvas", "portrait"], &["Painter"]),
        (&["song", "record", "band"], &["Musician", "Album"]),
        (&["river", "mayor", "district"], &["City", "Village"]),
        (&["region", "border"], &["City", "Village", "Country"]),
        (
            &["founded", "shares", "market"],
            &["Airline", "Bank", "SportsTeam"],
        ),
        (
            &["release", "premiere", "critics"],
            &["Film", "Album", "Musician"],
        ),
    ]
}

struct Entity {
    id: String,
    name: String,
    ty: &'static str,
}

fn log_uniform(rng: &mut TaskRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn place_name(rng: &mut TaskRng, used: &mut BTreeSet<String>) -> String {
    loop {
        let n = rng.random_range(2..4);
        let s: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if used.insert(s.clone()) {
            return s;
        }
    }
}

fn main() -> std::io::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy"));
    std::fs::create_dir_all(&out)?;
    let mut rng = rng::stream(SEED, "toy");

    let mut entities: Vec<Entity> = Vec::new();
    let mut used_names = BTreeSet::new();
    for (ty, n) in COUNTS {
        for i in 0..n {
            let name = match ty {
                "SoccerPlayer" | "TennisPlayer" | "Painter" | "Musician" => loop {
                    let full = format!(
                        "{} {}",
                        FIRST.choose(&mut rng).unwrap(),
                        LAST.choose(&mut rng).unwrap()
                    );
                    if used_names.insert(full.clone()) {
                        break full;
                    }
                },
                "Airline" => format!("{} air", place_name(&mut rng, &mut used_names)),
                "Bank" => format!("{} bank", place_name(&mut rng, &mut used_names)),
                "SportsTeam" => format!("{} united", place_name(&mut rng, &mut used_names)),
                "Film" => format!("the {} story", place_name(&mut rng, &mut used_names)),
                "Album" => format!("{} sessions", place_name(&mut rng, &mut used_names)),
                _ => place_name(&mut rng, &mut used_names),
            };
            entities.push(Entity {
                id: format!("{ty}_{i:02}"),
                name,
                ty,
            });
        }
    }
    let of_type = |tys: &[&str]| -> Vec<&str> {
        entities
            .iter()
            .filter(|e| tys.contains(&e.ty))
            .map(|e| e.id.as_str())
            .collect()
    };
    let persons = of_type(&["SoccerPlayer", "TennisPlayer", "Painter", "Musician"]);
    let settlements = of_type(&["City", "Village"]);
    let cities = of_type(&["City"]);
    let countries = of_type(&["Country"]);
    let teams = of_type(&["SportsTeam"]);
    let musicians = of_type(&["Musician"]);

    let mut triples: BTreeSet<(String, &str, String)> = BTreeSet::new();
    let mut add = |h: &str, r: &'static str, t: &str| {
        triples.insert((h.to_owned(), r, t.to_owned()));
    };
    for e in &entities {
        let mut pick = |pool: &[&str]| pool.choose(&mut rng).unwrap().to_string();
        match e.ty {
            "SoccerPlayer" => {
                add(&e.id, "birthPlace", &pick(&settlements));
                add(&e.id, "team", &pick(&teams));
            }
            "TennisPlayer" | "Painter" | "Musician" => {
                add(&e.id, "birthPlace", &pick(&settlements))
            }
            "City" | "Village" => add(&e.id, "country", &pick(&countries)),
            "Airline" | "Bank" | "SportsTeam" => add(&e.id, "headquarter", &pick(&cities)),
            "Album" => add(&e.id, "artist", &pick(&musicians)),
            "Film" => {
                for p in persons.choose_multiple(&mut rng, 2) {
                    add(&e.id, "starring", p);
                }
            }
            _ => {}
        }
    }

    let mut lines: BTreeMap<&str, String> = BTreeMap::new();
    let mut push = |file: &'static str, line: String| {
        let s = lines.entry(file).or_default();
        s.push_str(&line);
        s.push('\n');
    };

    for (ty, parent, level) in ONTOLOGY {
        push("ontology.tsv", format!("{ty}\t{parent}\t{level}"));
    }
    for e in &entities {
        push("entities.tsv", format!("{}\t{}", e.id, e.name));
        push("assignments.tsv", format!("{}\t{}", e.id, e.ty));
    }
    for (h, r, t) in &triples {
        push("triples.tsv", format!("{h}\t{r}\t{t}"));
    }

    let mut pop: BTreeMap<&str, u64> = BTreeMap::new();
    for e in &entities {
        let c = if rng.random_bool(0.05) {
            0
        } else {
            log_uniform(&mut rng, 1.0, 20_000.0).round() as u64
        };
        pop.insert(&e.id, c);
        push("popularity.tsv", format!("{}\t{c}", e.id));
    }

    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &entities {
        let k = counters.entry(e.ty).or_default();
        let idx = *k;
        *k += 1;
        match e.ty {
            "Painter" | "Musician" => {
                let year = 1850 + 10 * (idx % 3) + rng.random_range(0..10);
                push("literals.tsv", format!("{}\tbirthYear\t{year}", e.id));
            }
            "SoccerPlayer" | "TennisPlayer" => {
                let year = 1950 + 10 * (idx % 4) + rng.random_range(0..10);
                push("literals.tsv", format!("{}\tbirthYear\t{year}", e.id));
            }
            "City" | "Village" | "Country" => {
                let (area, popn) = match e.ty {
                    "City" => ((50.0, 2_000.0), (1e5, 5e6)),
                    "Village" => ((1.0, 50.0), (200.0, 5_000.0)),
                    _ => ((1e4, 1e6), (1e6, 1e8)),
                };
                let a = log_uniform(&mut rng, area.0, area.1);
                let p = log_uniform(&mut rng, popn.0, popn.1).round();
                push("literals.tsv", format!("{}\tareaKm2\t{a:.1}", e.id));
                push("literals.tsv", format!("{}\tpopulation\t{p}", e.id));
            }
            "Airline" | "Bank" => {
                let cur = if idx.is_multiple_of(2) { "USD" } else { "EUR" };
                let v = log_uniform(&mut rng, 1e7, 1e11).round();
                push("literals.tsv", format!("{}\trevenue\t{v}\t{cur}", e.id));
            }
            _ => {}
        }
    }

    let groups = topic_groups();
    for e in &entities {
        let mut words: Vec<&str> = e.name.split_whitespace().collect();
        words.extend(HIGH_WORDS.iter().filter(|_| rng.random_bool(0.95)));
        for (ws, tys) in &groups {
            let p = if tys.contains(&e.ty) { 0.9 } else { 0.03 };
            words.extend(ws.iter().filter(|_| rng.random_bool(p)));
        }
        words.extend(NOISE_WORDS.choose_multiple(&mut rng, 3));
        words.shuffle(&mut rng);
        push("descriptions.tsv", format!("{}\t{}", e.id, words.join(" ")));
        for _ in 0..2 {
            let mut near: Vec<&str> = words
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.6))
                .collect();
            near.extend(NOISE_WORDS.choose_multiple(&mut rng, 2));
            near.shuffle(&mut rng);
            let cut = near.len() / 2;
            push(
                "mentions.tsv",
                format!(
                    "{}\t{}\t{}",
                    e.id,
                    near[..cut].join(" "),
                    near[cut..].join(" ")
                ),
            );
        }
    }

    let mut neighbours: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (h, _, t) in &triples {
        neighbours.entry(h).or_default().push(t);
        neighbours.entry(t).or_default().push(h);
    }
    for e in &entities {
        push("aliases.tsv", format!("{}\t{}", e.name, e.id));
        if persons.contains(&e.id.as_str()) {
            let last = e.name.split_whitespace().last().unwrap();
            push("aliases.tsv", format!("{last}\t{}", e.id));
        }
    }
    let mut el_pool: Vec<&str> = persons.clone();
    el_pool.shuffle(&mut rng);
    let mut el = String::new();
    for (i, gold) in el_pool.iter().cycle().take(100).enumerate() {
        let e = entities.iter().find(|e| e.id == *gold).unwrap();
        let surface = if i % 2 == 0 {
            e.name.split_whitespace().last().unwrap().to_owned()
        } else {
            e.name.clone()
        };
        let context: Vec<&str> = neighbours.get(gold).cloned().unwrap_or_default();
        let m = serde_json::json!({
            "id": format!("m{i:03}"),
            "doc": format!("doc{}", i % 10),
            "surface": surface,
            "context": context,
            "gold": gold,
        });
        let _ = writeln!(el, "{m}");
        if i == 59 {
            lines.insert("el_train.jsonl", std::mem::take(&mut el));
        }
    }
    lines.insert("el_test.jsonl", el);

    for (file, text) in &lines {
        std::fs::write(out.join(file), text)?;
    }
    println!(
        "wrote {} entities, {} triples to {}",
        entities.len(),
        triples.len(),
        out.display()
    );
    Ok(())
}
