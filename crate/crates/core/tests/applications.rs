use std::fs::File;
use std::path::PathBuf;

use surprisal::apps::cricket::{run_cricket_csv, CricketConfig};
use surprisal::apps::mortality::{read_mortality_csv, run_mortality_csv, MortalityConfig};

fn data(name: &str) -> File {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    File::open(path).unwrap()
}

#[test]
fn cricket_fixture_ranks_planted_row_first() {
    let out = run_cricket_csv(data("cricket_synthetic.csv"), &CricketConfig::default()).unwrap();
    assert_eq!(format!("{:.3}", out.pooled_proportion()), "0.130");
    assert_eq!(out.dropped_zero_innings, 1);
    let top = &out.ranked[0];
    assert_eq!((top.innings, top.notouts), (265, 114));
    assert!(top.flagged);
    let p265 = out.smooth.fitted_prob(265.0);
    assert!((0.138..=0.158).contains(&p265), "{p265}");
    for w in out.ranked.windows(2) {
        assert!(w[0].p <= w[1].p);
    }
}

#[test]
fn mortality_fixture_keeps_events_and_drops_blips() {
    let out = run_mortality_csv(data("mortality_synthetic.csv"), &MortalityConfig::default()).unwrap();
    let male = out.flagged_years("male");
    let female = out.flagged_years("female");
    for year in [1914, 1915, 1916, 1917, 1918, 1940] {
        assert!(male.contains(&year), "male {year} missing from {male:?}");
    }
    assert!(female.contains(&1918), "{female:?}");
    assert!(!male.contains(&1950), "{male:?}");
    let records = read_mortality_csv(data("mortality_synthetic.csv")).unwrap();
    let blip = records
        .iter()
        .position(|r| r.year == 1950 && r.age == 5 && r.sex == "male")
        .unwrap();
    assert!(out.raw_report.flagged.contains(&blip));
    assert!(!out.report.flagged.contains(&blip));
    assert!(!female.contains(&1960) && !female.contains(&1975), "{female:?}");

    let loose = run_mortality_csv(
        data("mortality_synthetic.csv"),
        &MortalityConfig { min_count: 1, ..Default::default() },
    )
    .unwrap();
    assert!(loose.report.flagged.len() > out.report.flagged.len());
    assert!(loose.flagged_years("female").contains(&1960));
}
