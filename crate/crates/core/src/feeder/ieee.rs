//! IEEE PES 37- and 123-node test feeders, converted to the plain-text
//! feeder format.
//!
//! The raw tables below follow the published feeder reports (line
//! configurations in ohm/mile, segment lengths in feet, spot loads). The
//! conversion flattens the devices the model does not represent:
//!
//! * closed switches become zero-impedance branches, open switches and the
//!   nodes only reachable through them are dropped;
//! * voltage regulators are ideal (unity ratio, no series impedance), and the
//!   123-node substation regulator 150-149 is merged into the source node;
//! * the in-line transformers become series impedances referred to the
//!   primary voltage;
//! * delta-connected loads are split evenly between their two phases and all
//!   loads are treated as constant PQ;
//! * shunt capacitors are omitted.

use num_complex::Complex64;

use super::{FeederSpec, NetworkModel, Phase, PhaseImpedanceMatrix, PhaseSet};
use crate::error::Result;

const FEET_PER_MILE: f64 = 5280.0;

/// Upper triangle of a symmetric 3x3 matrix, row-major:
/// (aa, ab, ac, bb, bc, cc), each (r, x) in ohm/mile.
type UpperTriangle = [(f64, f64); 6];

struct LineConfig {
    id: &'static str,
    phases: &'static str,
    z: UpperTriangle,
}

impl LineConfig {
    fn per_mile(&self) -> PhaseImpedanceMatrix {
        let mut m = PhaseImpedanceMatrix::zero();
        let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (&(i, j), &(r, x)) in idx.iter().zip(&self.z) {
            m.0[i][j] = Complex64::new(r, x);
            m.0[j][i] = Complex64::new(r, x);
        }
        m
    }

    fn phase_set(&self) -> PhaseSet {
        PhaseSet::parse(self.phases).expect("static phase set")
    }
}

enum Segment {
    Line {
        from: &'static str,
        to: &'static str,
        feet: f64,
        config: &'static str,
    },
    /// Closed switch or ideal regulator.
    Tie { from: &'static str, to: &'static str },
    Transformer {
        from: &'static str,
        to: &'static str,
        kva: f64,
        kv_high: f64,
        r_pct: f64,
        x_pct: f64,
    },
}

#[derive(Clone, Copy)]
enum Conn {
    Wye,
    Delta,
}

/// (node, connection, [(kW, kvar); 3]); for delta loads the three
/// columns are the AB, BC and CA branches.
type SpotLoad = (&'static str, Conn, [(f64, f64); 3]);

struct RawFeeder {
    name: &'static str,
    kv: f64,
    source: &'static str,
    configs: &'static [LineConfig],
    segments: &'static [Segment],
    loads: &'static [SpotLoad],
}

impl RawFeeder {
    fn to_spec(&self, source_pu: f64) -> FeederSpec {
        let config = |id: &str| {
            self.configs
                .iter()
                .find(|c| c.id == id)
                .unwrap_or_else(|| panic!("unknown line config {id}"))
        };
        let mut nodes: Vec<(String, PhaseSet)> = vec![(self.source.to_string(), PhaseSet::ABC)];
        let mut branches = Vec::new();
        let phase_of = |id: &str, nodes: &Vec<(String, PhaseSet)>| {
            nodes.iter().find(|(n, _)| n == id).map(|(_, p)| *p)
        };
        // Segments are listed in an arbitrary order; resolve phases of a
        // tie/transformer from its upstream node, so iterate until every
        // segment is placed.
        let mut pending: Vec<&Segment> = self.segments.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|seg| {
                let (from, to, phases, z) = match seg {
                    Segment::Line {
                        from,
                        to,
                        feet,
                        config: c,
                    } => {
                        let cfg = config(c);
                        (*from, *to, cfg.phase_set(), cfg.per_mile().scale(feet / FEET_PER_MILE))
                    }
                    Segment::Tie { from, to } => {
                        let Some(p) = phase_of(from, &nodes) else { return true };
                        (*from, *to, p, PhaseImpedanceMatrix::zero())
                    }
                    Segment::Transformer {
                        from,
                        to,
                        kva,
                        kv_high,
                        r_pct,
                        x_pct,
                    } => {
                        let Some(p) = phase_of(from, &nodes) else { return true };
                        let z_base = kv_high * kv_high * 1000.0 / kva;
                        let z = Complex64::new(*r_pct, *x_pct) * (z_base / 100.0);
                        (*from, *to, p, PhaseImpedanceMatrix::diagonal(z).restricted_to(p))
                    }
                };
                if phase_of(from, &nodes).is_none() {
                    return true;
                }
                nodes.push((to.to_string(), phases));
                branches.push((from.to_string(), to.to_string(), z));
                false
            });
            assert!(pending.len() < before, "segments unreachable from the source");
        }

        let mut loads = Vec::new();
        for (node, conn, cols) in self.loads {
            match conn {
                Conn::Wye => {
                    for (k, &(p, q)) in cols.iter().enumerate() {
                        if p != 0.0 || q != 0.0 {
                            loads.push((node.to_string(), Phase::from_index(k), p, q));
                        }
                    }
                }
                Conn::Delta => {
                    for (k, &(p, q)) in cols.iter().enumerate() {
                        if p != 0.0 || q != 0.0 {
                            for ph in [Phase::from_index(k), Phase::from_index(k + 1)] {
                                loads.push((node.to_string(), ph, p / 2.0, q / 2.0));
                            }
                        }
                    }
                }
            }
        }

        FeederSpec {
            name: self.name.to_string(),
            v_nominal_kv: self.kv,
            s_base_kva: 1000.0,
            source_pu,
            source: self.source.to_string(),
            nodes,
            branches,
            loads,
        }
    }
}

/// Regulated source voltage used for the bundled 37-node feeder: the
/// substation regulator's published phase-a output (tap +7 of 0.625%).
pub const IEEE37_SOURCE_PU: f64 = 1.04375;
/// Regulated source voltage used for the bundled 123-node feeder. The
/// downstream regulators are flattened, so the substation is set just high
/// enough (0.005 pu steps) for the base case to stay above 0.95 pu.
pub const IEEE123_SOURCE_PU: f64 = 1.045;

pub fn ieee37_spec() -> FeederSpec {
    IEEE37.to_spec(IEEE37_SOURCE_PU)
}

pub fn ieee123_spec() -> FeederSpec {
    IEEE123.to_spec(IEEE123_SOURCE_PU)
}

pub fn ieee37() -> Result<NetworkModel> {
    NetworkModel::new(ieee37_spec())
}

pub fn ieee123() -> Result<NetworkModel> {
    NetworkModel::new(ieee123_spec())
}

/// Bundled feeder by name (`ieee37`, `ieee123`).
pub fn bundled(name: &str) -> Option<Result<NetworkModel>> {
    match name.to_ascii_lowercase().as_str() {
        "ieee37" | "ieee-37" | "37" => Some(ieee37()),
        "ieee123" | "ieee-123" | "123" => Some(ieee123()),
        _ => None,
    }
}

const COMMENT_37: &str = "IEEE 37-node test feeder (4.8 kV, underground, delta loads split per phase).\n\
Regulator at 799 treated as ideal; XFM-1 (709-775) as a series impedance at 4.8 kV.";

const COMMENT_123: &str = "IEEE 123-node test feeder (4.16 kV). Open switches removed, regulators ideal,\n\
substation regulator 150-149 merged into source 150; XFM-1 (61-610) as a series impedance at 4.16 kV.";

pub fn ieee37_text() -> Result<String> {
    Ok(super::write_feeder(&ieee37()?, Some(COMMENT_37)))
}

pub fn ieee123_text() -> Result<String> {
    Ok(super::write_feeder(&ieee123()?, Some(COMMENT_123)))
}

use Conn::{Delta, Wye};

macro_rules! line {
    ($f:expr, $t:expr, $ft:expr, $c:expr) => {
        Segment::Line {
            from: $f,
            to: $t,
            feet: $ft as f64,
            config: $c,
        }
    };
}

const Z0: (f64, f64) = (0.0, 0.0);

static IEEE37_CONFIGS: [LineConfig; 4] = [
    LineConfig {
        id: "721",
        phases: "abc",
        z: [(0.2926, 0.1973), (0.0673, -0.0368), (0.0337, -0.0417), (0.2646, 0.1900), (0.0673, -0.0368), (0.2926, 0.1973)],
    },
    LineConfig {
        id: "722",
        phases: "abc",
        z: [(0.4751, 0.2973), (0.1629, -0.0326), (0.1234, -0.0607), (0.4488, 0.2678), (0.1629, -0.0326), (0.4751, 0.2973)],
    },
    LineConfig {
        id: "723",
        phases: "abc",
        z: [(1.2936, 0.6713), (0.4871, 0.2111), (0.4585, 0.1521), (1.3022, 0.6326), (0.4871, 0.2111), (1.2936, 0.6713)],
    },
    LineConfig {
        id: "724",
        phases: "abc",
        z: [(2.0952, 0.7758), (0.5204, 0.2738), (0.4926, 0.2123), (2.1068, 0.7398), (0.5204, 0.2738), (2.0952, 0.7758)],
    },
];

static IEEE37_SEGMENTS: [Segment; 36] = [
    line!("799", "701", 1850, "721"),
    line!("701", "702", 960, "722"),
    line!("702", "705", 400, "724"),
    line!("702", "713", 360, "723"),
    line!("702", "703", 1320, "722"),
    line!("703", "727", 240, "724"),
    line!("703", "730", 600, "723"),
    line!("704", "714", 80, "724"),
    line!("704", "720", 800, "723"),
    line!("705", "742", 320, "724"),
    line!("705", "712", 240, "724"),
    line!("706", "725", 280, "724"),
    line!("707", "724", 760, "724"),
    line!("707", "722", 120, "724"),
    line!("708", "733", 320, "723"),
    line!("708", "732", 320, "724"),
    line!("709", "731", 600, "723"),
    line!("709", "708", 320, "723"),
    line!("710", "735", 200, "724"),
    line!("710", "736", 1280, "724"),
    line!("711", "741", 400, "723"),
    line!("711", "740", 200, "724"),
    line!("713", "704", 520, "723"),
    line!("714", "718", 520, "724"),
    line!("720", "707", 920, "724"),
    line!("720", "706", 600, "723"),
    line!("727", "744", 280, "723"),
    line!("730", "709", 200, "723"),
    line!("733", "734", 560, "723"),
    line!("734", "737", 640, "723"),
    line!("734", "710", 520, "724"),
    line!("737", "738", 400, "723"),
    line!("738", "711", 400, "723"),
    line!("744", "728", 200, "724"),
    line!("744", "729", 280, "724"),
    Segment::Transformer {
        from: "709",
        to: "775",
        kva: 500.0,
        kv_high: 4.8,
        r_pct: 0.09,
        x_pct: 1.81,
    },
];

const N: (f64, f64) = (0.0, 0.0);

static IEEE37_LOADS: [SpotLoad; 25] = [
    ("701", Delta, [(140.0, 70.0), (140.0, 70.0), (350.0, 175.0)]),
    ("712", Delta, [N, N, (85.0, 40.0)]),
    ("713", Delta, [N, N, (85.0, 40.0)]),
    ("714", Delta, [(17.0, 8.0), (21.0, 10.0), N]),
    ("718", Delta, [(85.0, 40.0), N, N]),
    ("720", Delta, [N, N, (85.0, 40.0)]),
    ("722", Delta, [N, (140.0, 70.0), (21.0, 10.0)]),
    ("724", Delta, [N, (42.0, 21.0), N]),
    ("725", Delta, [N, (42.0, 21.0), N]),
    ("727", Delta, [N, N, (42.0, 21.0)]),
    ("728", Delta, [(42.0, 21.0), (42.0, 21.0), (42.0, 21.0)]),
    ("729", Delta, [(42.0, 21.0), N, N]),
    ("730", Delta, [N, N, (85.0, 40.0)]),
    ("731", Delta, [N, (85.0, 40.0), N]),
    ("732", Delta, [N, N, (42.0, 21.0)]),
    ("733", Delta, [(85.0, 40.0), N, N]),
    ("734", Delta, [N, N, (42.0, 21.0)]),
    ("735", Delta, [N, N, (85.0, 40.0)]),
    ("736", Delta, [N, (42.0, 21.0), N]),
    ("737", Delta, [(140.0, 70.0), N, N]),
    ("738", Delta, [(126.0, 62.0), N, N]),
    ("740", Delta, [N, N, (85.0, 40.0)]),
    ("741", Delta, [N, N, (42.0, 21.0)]),
    ("742", Delta, [(8.0, 4.0), (85.0, 40.0), N]),
    ("744", Delta, [(42.0, 21.0), N, N]),
];

static IEEE37: RawFeeder = RawFeeder {
    name: "ieee37",
    kv: 4.8,
    source: "799",
    configs: &IEEE37_CONFIGS,
    segments: &IEEE37_SEGMENTS,
    loads: &IEEE37_LOADS,
};

// Overhead configurations 1-6 share one conductor set in different phase
// positions, so their matrices are permutations of one another.
static IEEE123_CONFIGS: [LineConfig; 12] = [
    LineConfig {
        id: "1",
        phases: "abc",
        z: [(0.4576, 1.0780), (0.1560, 0.5017), (0.1535, 0.3849), (0.4666, 1.0482), (0.1580, 0.4236), (0.4615, 1.0651)],
    },
    LineConfig {
        id: "2",
        phases: "abc",
        z: [(0.4666, 1.0482), (0.1580, 0.4236), (0.1560, 0.5017), (0.4615, 1.0651), (0.1535, 0.3849), (0.4576, 1.0780)],
    },
    LineConfig {
        id: "3",
        phases: "abc",
        z: [(0.4615, 1.0651), (0.1535, 0.3849), (0.1580, 0.4236), (0.4576, 1.0780), (0.1560, 0.5017), (0.4666, 1.0482)],
    },
    LineConfig {
        id: "4",
        phases: "abc",
        z: [(0.4615, 1.0651), (0.1580, 0.4236), (0.1535, 0.3849), (0.4666, 1.0482), (0.1560, 0.5017), (0.4576, 1.0780)],
    },
    LineConfig {
        id: "5",
        phases: "abc",
        z: [(0.4666, 1.0482), (0.1560, 0.5017), (0.1580, 0.4236), (0.4576, 1.0780), (0.1535, 0.3849), (0.4615, 1.0651)],
    },
    LineConfig {
        id: "6",
        phases: "abc",
        z: [(0.4576, 1.0780), (0.1535, 0.3849), (0.1560, 0.5017), (0.4615, 1.0651), (0.1580, 0.4236), (0.4666, 1.0482)],
    },
    LineConfig {
        id: "7",
        phases: "ac",
        z: [(0.4576, 1.0780), Z0, (0.1535, 0.3849), Z0, Z0, (0.4615, 1.0651)],
    },
    LineConfig {
        id: "8",
        phases: "ab",
        z: [(0.4576, 1.0780), (0.1535, 0.3849), Z0, (0.4615, 1.0651), Z0, Z0],
    },
    LineConfig {
        id: "9",
        phases: "a",
        z: [(1.3292, 1.3475), Z0, Z0, Z0, Z0, Z0],
    },
    LineConfig {
        id: "10",
        phases: "b",
        z: [Z0, Z0, Z0, (1.3292, 1.3475), Z0, Z0],
    },
    LineConfig {
        id: "11",
        phases: "c",
        z: [Z0, Z0, Z0, Z0, Z0, (1.3292, 1.3475)],
    },
    LineConfig {
        id: "12",
        phases: "abc",
        z: [(1.5209, 0.7521), (0.5198, 0.2775), (0.4924, 0.2157), (1.5329, 0.7162), (0.5198, 0.2775), (1.5209, 0.7521)],
    },
];

static IEEE123_SEGMENTS: [Segment; 122] = [
    line!("150", "1", 400, "1"),
    line!("1", "2", 175, "10"),
    line!("1", "3", 250, "11"),
    line!("1", "7", 300, "1"),
    line!("3", "4", 200, "11"),
    line!("3", "5", 325, "11"),
    line!("5", "6", 250, "11"),
    line!("7", "8", 200, "1"),
    line!("8", "12", 225, "10"),
    line!("8", "9", 225, "9"),
    line!("8", "13", 300, "1"),
    line!("9", "14", 425, "9"),
    line!("13", "34", 150, "11"),
    line!("13", "18", 825, "2"),
    line!("14", "11", 250, "9"),
    line!("14", "10", 250, "9"),
    line!("15", "16", 375, "11"),
    line!("15", "17", 350, "11"),
    line!("18", "19", 250, "9"),
    line!("18", "21", 300, "2"),
    line!("19", "20", 325, "9"),
    line!("21", "22", 525, "10"),
    line!("21", "23", 250, "2"),
    line!("23", "24", 550, "11"),
    line!("23", "25", 275, "2"),
    line!("25", "26", 350, "7"),
    line!("25", "28", 200, "2"),
    line!("26", "27", 275, "7"),
    line!("26", "31", 225, "11"),
    line!("27", "33", 500, "9"),
    line!("28", "29", 300, "2"),
    line!("29", "30", 350, "2"),
    line!("30", "250", 200, "2"),
    line!("31", "32", 300, "11"),
    line!("34", "15", 100, "11"),
    line!("35", "36", 650, "8"),
    line!("35", "40", 250, "1"),
    line!("36", "37", 300, "9"),
    line!("36", "38", 250, "10"),
    line!("38", "39", 325, "10"),
    line!("40", "41", 325, "11"),
    line!("40", "42", 250, "1"),
    line!("42", "43", 500, "10"),
    line!("42", "44", 200, "1"),
    line!("44", "45", 200, "9"),
    line!("44", "47", 250, "1"),
    line!("45", "46", 300, "9"),
    line!("47", "48", 150, "4"),
    line!("47", "49", 250, "4"),
    line!("49", "50", 250, "4"),
    line!("50", "51", 250, "4"),
    line!("52", "53", 200, "1"),
    line!("53", "54", 125, "1"),
    line!("54", "55", 275, "1"),
    line!("54", "57", 350, "3"),
    line!("55", "56", 275, "1"),
    line!("57", "58", 250, "10"),
    line!("57", "60", 750, "3"),
    line!("58", "59", 250, "10"),
    line!("60", "61", 550, "5"),
    line!("60", "62", 250, "12"),
    line!("62", "63", 175, "12"),
    line!("63", "64", 350, "12"),
    line!("64", "65", 425, "12"),
    line!("65", "66", 325, "12"),
    line!("67", "68", 200, "9"),
    line!("67", "72", 275, "3"),
    line!("67", "97", 250, "3"),
    line!("68", "69", 275, "9"),
    line!("69", "70", 325, "9"),
    line!("70", "71", 275, "9"),
    line!("72", "73", 275, "11"),
    line!("72", "76", 200, "3"),
    line!("73", "74", 350, "11"),
    line!("74", "75", 400, "11"),
    line!("76", "77", 400, "6"),
    line!("76", "86", 700, "3"),
    line!("77", "78", 100, "6"),
    line!("78", "79", 225, "6"),
    line!("78", "80", 475, "6"),
    line!("80", "81", 475, "6"),
    line!("81", "82", 250, "6"),
    line!("81", "84", 675, "11"),
    line!("82", "83", 250, "6"),
    line!("84", "85", 475, "11"),
    line!("86", "87", 450, "6"),
    line!("87", "88", 175, "9"),
    line!("87", "89", 275, "6"),
    line!("89", "90", 225, "10"),
    line!("89", "91", 225, "6"),
    line!("91", "92", 300, "11"),
    line!("91", "93", 225, "6"),
    line!("93", "94", 275, "9"),
    line!("93", "95", 300, "6"),
    line!("95", "96", 200, "10"),
    line!("97", "98", 275, "3"),
    line!("98", "99", 550, "3"),
    line!("99", "100", 300, "3"),
    line!("100", "450", 800, "3"),
    line!("101", "102", 225, "11"),
    line!("101", "105", 275, "3"),
    line!("102", "103", 325, "11"),
    line!("103", "104", 700, "11"),
    line!("105", "106", 225, "10"),
    line!("105", "108", 325, "3"),
    line!("106", "107", 575, "10"),
    line!("108", "109", 450, "9"),
    line!("108", "300", 1000, "3"),
    line!("109", "110", 300, "9"),
    line!("110", "111", 575, "9"),
    line!("110", "112", 125, "9"),
    line!("112", "113", 525, "9"),
    line!("113", "114", 325, "9"),
    line!("135", "35", 375, "4"),
    line!("152", "52", 400, "1"),
    line!("160", "67", 350, "6"),
    line!("197", "101", 250, "3"),
    Segment::Tie { from: "13", to: "152" },
    Segment::Tie { from: "18", to: "135" },
    Segment::Tie { from: "60", to: "160" },
    Segment::Tie { from: "97", to: "197" },
    Segment::Transformer {
        from: "61",
        to: "610",
        kva: 150.0,
        kv_high: 4.16,
        r_pct: 1.27,
        x_pct: 2.72,
    },
];

static IEEE123_LOADS: [SpotLoad; 85] = [
    ("1", Wye, [(40.0, 20.0), N, N]),
    ("2", Wye, [N, (20.0, 10.0), N]),
    ("4", Wye, [N, N, (40.0, 20.0)]),
    ("5", Wye, [N, N, (20.0, 10.0)]),
    ("6", Wye, [N, N, (40.0, 20.0)]),
    ("7", Wye, [(20.0, 10.0), N, N]),
    ("9", Wye, [(40.0, 20.0), N, N]),
    ("10", Wye, [(20.0, 10.0), N, N]),
    ("11", Wye, [(40.0, 20.0), N, N]),
    ("12", Wye, [N, (20.0, 10.0), N]),
    ("16", Wye, [N, N, (40.0, 20.0)]),
    ("17", Wye, [N, N, (20.0, 10.0)]),
    ("19", Wye, [(40.0, 20.0), N, N]),
    ("20", Wye, [(40.0, 20.0), N, N]),
    ("22", Wye, [N, (40.0, 20.0), N]),
    ("24", Wye, [N, N, (40.0, 20.0)]),
    ("28", Wye, [(40.0, 20.0), N, N]),
    ("29", Wye, [(40.0, 20.0), N, N]),
    ("30", Wye, [N, N, (40.0, 20.0)]),
    ("31", Wye, [N, N, (20.0, 10.0)]),
    ("32", Wye, [N, N, (20.0, 10.0)]),
    ("33", Wye, [(40.0, 20.0), N, N]),
    ("34", Wye, [N, N, (40.0, 20.0)]),
    ("35", Delta, [(40.0, 20.0), N, N]),
    ("37", Wye, [(40.0, 20.0), N, N]),
    ("38", Wye, [N, (20.0, 10.0), N]),
    ("39", Wye, [N, (20.0, 10.0), N]),
    ("41", Wye, [N, N, (20.0, 10.0)]),
    ("42", Wye, [(20.0, 10.0), N, N]),
    ("43", Wye, [N, (40.0, 20.0), N]),
    ("45", Wye, [(20.0, 10.0), N, N]),
    ("46", Wye, [(20.0, 10.0), N, N]),
    ("47", Wye, [(35.0, 25.0), (35.0, 25.0), (35.0, 25.0)]),
    ("48", Wye, [(70.0, 50.0), (70.0, 50.0), (70.0, 50.0)]),
    ("49", Wye, [(35.0, 25.0), (70.0, 50.0), (35.0, 20.0)]),
    ("50", Wye, [N, N, (40.0, 20.0)]),
    ("51", Wye, [(20.0, 10.0), N, N]),
    ("52", Wye, [(40.0, 20.0), N, N]),
    ("53", Wye, [(40.0, 20.0), N, N]),
    ("55", Wye, [(20.0, 10.0), N, N]),
    ("56", Wye, [N, (20.0, 10.0), N]),
    ("58", Wye, [N, (20.0, 10.0), N]),
    ("59", Wye, [N, (20.0, 10.0), N]),
    ("60", Wye, [(20.0, 10.0), N, N]),
    ("62", Wye, [N, N, (40.0, 20.0)]),
    ("63", Wye, [(40.0, 20.0), N, N]),
    ("64", Wye, [N, (75.0, 35.0), N]),
    ("65", Delta, [(35.0, 25.0), (35.0, 25.0), (70.0, 50.0)]),
    ("66", Wye, [N, N, (75.0, 35.0)]),
    ("68", Wye, [(20.0, 10.0), N, N]),
    ("69", Wye, [(40.0, 20.0), N, N]),
    ("70", Wye, [(20.0, 10.0), N, N]),
    ("71", Wye, [(40.0, 20.0), N, N]),
    ("73", Wye, [N, N, (40.0, 20.0)]),
    ("74", Wye, [N, N, (40.0, 20.0)]),
    ("75", Wye, [N, N, (40.0, 20.0)]),
    ("76", Delta, [(105.0, 80.0), (70.0, 50.0), (70.0, 50.0)]),
    ("77", Wye, [N, (40.0, 20.0), N]),
    ("79", Wye, [(40.0, 20.0), N, N]),
    ("80", Wye, [N, (40.0, 20.0), N]),
    ("82", Wye, [(40.0, 20.0), N, N]),
    ("83", Wye, [N, N, (20.0, 10.0)]),
    ("84", Wye, [N, N, (20.0, 10.0)]),
    ("85", Wye, [N, N, (40.0, 20.0)]),
    ("86", Wye, [N, (20.0, 10.0), N]),
    ("87", Wye, [N, (40.0, 20.0), N]),
    ("88", Wye, [(40.0, 20.0), N, N]),
    ("90", Wye, [N, (40.0, 20.0), N]),
    ("92", Wye, [N, N, (40.0, 20.0)]),
    ("94", Wye, [(40.0, 20.0), N, N]),
    ("95", Wye, [N, (20.0, 10.0), N]),
    ("96", Wye, [N, (20.0, 10.0), N]),
    ("98", Wye, [(40.0, 20.0), N, N]),
    ("99", Wye, [N, (40.0, 20.0), N]),
    ("100", Wye, [N, N, (40.0, 20.0)]),
    ("102", Wye, [N, N, (20.0, 10.0)]),
    ("103", Wye, [N, N, (40.0, 20.0)]),
    ("104", Wye, [N, N, (40.0, 20.0)]),
    ("106", Wye, [N, (40.0, 20.0), N]),
    ("107", Wye, [N, (40.0, 20.0), N]),
    ("109", Wye, [(40.0, 20.0), N, N]),
    ("111", Wye, [(20.0, 10.0), N, N]),
    ("112", Wye, [(20.0, 10.0), N, N]),
    ("113", Wye, [(40.0, 20.0), N, N]),
    ("114", Wye, [(20.0, 10.0), N, N]),
];

static IEEE123: RawFeeder = RawFeeder {
    name: "ieee123",
    kv: 4.16,
    source: "150",
    configs: &IEEE123_CONFIGS,
    segments: &IEEE123_SEGMENTS,
    loads: &IEEE123_LOADS,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ieee37_shape() {
        let net = ieee37().unwrap();
        assert_eq!(net.len(), 37);
        assert_eq!(net.node(net.source()).id, "799");
        assert_eq!(net.v_nominal_kv(), 4.8);
        // Published totals: 727 + 639 + 1091 kW across the three delta branches.
        assert!((net.total_demand_kw() - 2457.0).abs() < 1e-9);
        assert!(net.nodes().iter().all(|n| n.phases == PhaseSet::ABC));
    }

    #[test]
    fn ieee123_shape() {
        let net = ieee123().unwrap();
        assert_eq!(net.len(), 123);
        assert_eq!(net.node(net.source()).id, "150");
        assert_eq!(net.v_nominal_kv(), 4.16);
        let per_phase: Vec<f64> = (0..3)
            .map(|p| net.loads().iter().map(|s| s[p].re).sum())
            .collect();
        // Published phase totals 1420 / 915 / 1155 kW, with the delta loads
        // at 35, 65 and 76 split across their phase pairs.
        assert!((per_phase.iter().sum::<f64>() - 3490.0).abs() < 1e-9, "{per_phase:?}");
        let counts = [1, 2, 3].map(|k| net.nodes().iter().filter(|n| n.phases.len() == k).count());
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    }
}
