//! Synthetic event corpora with known structure.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EventRecord, GroupMetadata, View, YearRange};

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub events: Vec<EventRecord>,
    pub metadata: Vec<GroupMetadata>,
    pub years: YearRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    /// Noisy four-style corpus used as the default fixture.
    Bundled,
    /// Three fixed styles with a growing number of groups per year.
    Declining,
    /// Three years whose first and last grouping coincide.
    Reversion,
}

impl std::str::FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bundled" => Ok(Self::Bundled),
            "declining" => Ok(Self::Declining),
            "reversion" => Ok(Self::Reversion),
            other => Err(Error::Config(format!("unknown corpus `{other}`"))),
        }
    }
}

pub fn generate(kind: CorpusKind, seed: u64) -> Corpus {
    match kind {
        CorpusKind::Bundled => bundled_corpus(seed),
        CorpusKind::Declining => declining_ratio_corpus(),
        CorpusKind::Reversion => reversion_corpus(),
    }
}

/// Operational profile: preferred categories per view.
struct Style {
    tactics: &'static [&'static str],
    targets: &'static [&'static str],
    weapons: &'static [&'static str],
    region: &'static str,
    ideology: &'static str,
}

const STYLES: [Style; 4] = [
    Style {
        tactics: &["Bombing/Explosion"],
        targets: &["Private Citizens & Property", "Business"],
        weapons: &["Explosives"],
        region: "Middle East & North Africa",
        ideology: "Religious",
    },
    Style {
        tactics: &["Armed Assault", "Assassination"],
        targets: &["Military", "Police"],
        weapons: &["Firearms"],
        region: "South Asia",
        ideology: "Ethno-nationalist",
    },
    Style {
        tactics: &["Hostage Taking (Kidnapping)"],
        targets: &["Business", "Government (General)"],
        weapons: &["Firearms", "Melee"],
        region: "South America",
        ideology: "Left-wing",
    },
    Style {
        tactics: &["Facility/Infrastructure Attack"],
        targets: &["Utilities", "Transportation"],
        weapons: &["Incendiary", "Sabotage Equipment"],
        region: "Western Europe",
        ideology: "Separatist",
    },
];

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

fn fixed_event(id: usize, year: i32, group: &str, style: &Style, region: &str) -> EventRecord {
    EventRecord {
        event_id: format!("e{id:06}"),
        year,
        group: group.to_string(),
        tactics: vec![style.tactics[0].to_string()],
        targets: vec![style.targets[0].to_string()],
        weapons: vec![style.weapons[0].to_string()],
        region: region.to_string(),
        doubt_flag: false,
    }
}

const REGIONS: [&str; 5] = [
    "Middle East & North Africa",
    "South Asia",
    "South America",
    "Western Europe",
    "Sub-Saharan Africa",
];

const IDEOLOGIES: [&str; 4] = ["Religious", "Ethno-nationalist", "Left-wing", "Separatist"];

/// The bundled corpus over 2001–2004.
pub fn bundled_corpus(seed: u64) -> Corpus {
    bundled_corpus_over(seed, YearRange::new(2001, 2004))
}

/// Four operational styles, nine groups each. Two groups are far more active
/// than the rest, three groups per style borrow one view from another style,
/// and one group per style enters a year late. The corpus also carries
/// doubted events, broad-label actors, and groups below the default activity
/// threshold.
pub fn bundled_corpus_over(seed: u64, years: YearRange) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut metadata = Vec::new();
    let mut next_id = 0usize;
    let mut push = |events: &mut Vec<EventRecord>, e: EventRecord| {
        events.push(EventRecord {
            event_id: format!("e{next_id:06}"),
            ..e
        });
        next_id += 1;
    };

    let off_profile = |rng: &mut ChaCha8Rng, view: View| -> String {
        let universe = view.universe();
        universe[rng.random_range(0..universe.len() - 1)].to_string()
    };

    for (s, style) in STYLES.iter().enumerate() {
        for k in 0..9 {
            let group = format!("Group {}{}", (b'A' + s as u8) as char, k + 1);
            let heavy = k == 0 && s < 2;
            let first_year = years.start + i32::from(k == 8);
            let tactic_style = if k == 7 { &STYLES[(s + 1) % 4] } else { style };
            let target_style = if k == 5 { &STYLES[(s + 3) % 4] } else { style };
            let weapon_style = if k == 6 { &STYLES[(s + 2) % 4] } else { style };
            let region = REGIONS[(s + k / 3) % REGIONS.len()];
            if !(s == 3 && k == 8) {
                metadata.push(GroupMetadata {
                    group: group.clone(),
                    ideology: IDEOLOGIES[(s + k / 4) % IDEOLOGIES.len()].to_string(),
                    most_common_region: region.to_string(),
                });
            }
            for year in first_year..=years.end {
                let n = if heavy {
                    rng.random_range(90..130)
                } else {
                    rng.random_range(14..30)
                };
                for _ in 0..n {
                    let mut tactics = vec![if rng.random_bool(0.85) {
                        pick(&mut rng, tactic_style.tactics).to_string()
                    } else {
                        off_profile(&mut rng, View::Tactic)
                    }];
                    if rng.random_bool(0.1) {
                        tactics.push(off_profile(&mut rng, View::Tactic));
                    }
                    let mut targets = vec![if rng.random_bool(0.8) {
                        pick(&mut rng, target_style.targets).to_string()
                    } else {
                        off_profile(&mut rng, View::Target)
                    }];
                    if rng.random_bool(0.15) {
                        targets.push(pick(&mut rng, target_style.targets).to_string());
                    }
                    let mut weapons = vec![if rng.random_bool(0.85) {
                        pick(&mut rng, weapon_style.weapons).to_string()
                    } else {
                        off_profile(&mut rng, View::Weapon)
                    }];
                    if rng.random_bool(0.1) {
                        weapons.push(off_profile(&mut rng, View::Weapon));
                    }
                    push(
                        &mut events,
                        EventRecord {
                            event_id: String::new(),
                            year,
                            group: group.clone(),
                            tactics,
                            targets,
                            weapons,
                            region: region.to_string(),
                            doubt_flag: rng.random_bool(0.03),
                        },
                    );
                }
            }
        }
    }

    // Broad perpetrator labels and barely active groups, all filtered out by
    // the default sample rules.
    for year in years.years() {
        for (label, style) in [("Unknown", &STYLES[0]), ("Gunmen", &STYLES[1])] {
            for _ in 0..6 {
                push(
                    &mut events,
                    fixed_event(0, year, label, style, style.region),
                );
            }
        }
        for (g, style) in STYLES.iter().take(2).enumerate() {
            for _ in 0..3 {
                push(
                    &mut events,
                    fixed_event(
                        0,
                        year,
                        &format!("Minor Cell {}", g + 1),
                        style,
                        style.region,
                    ),
                );
            }
        }
    }

    Corpus {
        events,
        metadata,
        years,
    }
}

/// Three styles with identical profiles inside each style; the styles hold
/// 5, 7, 9 and 11 groups in 2001–2004 (15, 21, 27, 33 groups in total), so
/// the cluster count stays at three while the group count grows.
pub fn declining_ratio_corpus() -> Corpus {
    let years = YearRange::new(2001, 2004);
    let mut events = Vec::new();
    let mut metadata = Vec::new();
    for (s, style) in STYLES.iter().take(3).enumerate() {
        for k in 0..11 {
            let group = format!("Style {} Group {:02}", s + 1, k + 1);
            metadata.push(GroupMetadata {
                group: group.clone(),
                ideology: style.ideology.to_string(),
                most_common_region: style.region.to_string(),
            });
            for (y, year) in years.years().enumerate() {
                if k >= 5 + 2 * y {
                    continue;
                }
                for _ in 0..50 {
                    events.push(fixed_event(events.len(), year, &group, style, style.region));
                }
            }
        }
    }
    Corpus {
        events,
        metadata,
        years,
    }
}

/// Eighteen groups over 2001–2003. The first and last years group them in
/// consecutive sixes; the middle year groups them by index modulo three.
pub fn reversion_corpus() -> Corpus {
    let years = YearRange::new(2001, 2003);
    let mut events = Vec::new();
    let mut metadata = Vec::new();
    for g in 0..18 {
        let group = format!("Group {:02}", g + 1);
        metadata.push(GroupMetadata {
            group: group.clone(),
            ideology: STYLES[g / 6].ideology.to_string(),
            most_common_region: STYLES[g / 6].region.to_string(),
        });
        for (y, year) in years.years().enumerate() {
            let style = if y == 1 {
                &STYLES[g % 3]
            } else {
                &STYLES[g / 6]
            };
            for _ in 0..20 {
                events.push(fixed_event(events.len(), year, &group, style, style.region));
            }
        }
    }
    Corpus {
        events,
        metadata,
        years,
    }
}

pub fn write_events(events: &[EventRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["event_id".to_string(), "year".into(), "group".into()];
    for view in View::ALL {
        for k in 1..=view.max_per_event() {
            header.push(format!("{}{k}", view.as_str()));
        }
    }
    header.push("region".into());
    header.push("doubt".into());
    w.write_record(&header)?;
    for e in events {
        let mut rec = vec![e.event_id.clone(), e.year.to_string(), e.group.clone()];
        for view in View::ALL {
            let cats = e.categories(view);
            for k in 0..view.max_per_event() {
                rec.push(cats.get(k).cloned().unwrap_or_default());
            }
        }
        rec.push(e.region.clone());
        rec.push(if e.doubt_flag { "1" } else { "0" }.into());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_metadata(metadata: &[GroupMetadata], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group", "ideology", "region"])?;
    for m in metadata {
        w.write_record([&m.group, &m.ideology, &m.most_common_region])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

impl Corpus {
    /// Writes `events.csv` and `metadata.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let events = dir.join("events.csv");
        let metadata = dir.join("metadata.csv");
        write_events(&self.events, &events)?;
        write_metadata(&self.metadata, &metadata)?;
        Ok((events, metadata))
    }
}
