//! File formats, the bundled UW-71 library, color rendering and palettes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::max_capacity;
use crate::error::{Error, Result};
use crate::model::{AssociationTable, ConceptSet, FeatureLibrary, FeatureRecord, Lab, Matrix};
use crate::stochastic::{simulate, MonteCarloConfig};

/// First header cell of an association CSV.
pub const FEATURE_COLUMN: &str = "feature_id";

const UW71_CSV: &str = include_str!("../data/uw71.csv");
const UW71_LEN: usize = 71;

pub fn load_association_csv(path: impl AsRef<Path>) -> Result<AssociationTable> {
    let file = std::fs::File::open(path)?;
    read_association_csv(file)
}

/// Parses `feature_id,<concept>,...` followed by one row per feature.
pub fn read_association_csv<R: Read>(reader: R) -> Result<AssociationTable> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    if header.is_empty() || header.get(0) != Some(FEATURE_COLUMN) {
        return Err(Error::Format(format!(
            "header must start with `{FEATURE_COLUMN}`"
        )));
    }
    let concept_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let concepts =
        ConceptSet::new(concept_names.clone()).map_err(|e| Error::Format(e.to_string()))?;

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let row = row + 1;
        if record.len() != header.len() {
            return Err(Error::Format(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                header.len()
            )));
        }
        ids.push(record[0].to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Validation {
                row,
                column: concept_names[j].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Validation {
                    row,
                    column: concept_names[j].clone(),
                    message: format!("association {value} outside [0, 1]"),
                });
            }
            values.push(value);
        }
    }
    let matrix = Matrix::new(ids.len(), concepts.len(), values)?;
    let library = FeatureLibrary::from_ids(ids)?;
    AssociationTable::new(library, concepts, matrix)
}

/// Writes values with the shortest representation that parses back exactly.
pub fn write_association_csv<W: Write>(table: &AssociationTable, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec![FEATURE_COLUMN.to_string()];
    header.extend(table.concepts().ids().iter().cloned());
    csv.write_record(&header)?;
    for i in 0..table.n_features() {
        let mut record = vec![table.library().get(i).id.clone()];
        record.extend(table.values().row(i).iter().map(|v| v.to_string()));
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct LibraryRow {
    index: String,
    sorted_position: Option<u32>,
    #[serde(rename = "L")]
    l: f64,
    a: f64,
    b: f64,
}

/// Reads a library CSV with columns `index,sorted_position,L,a,b`.
pub fn read_library_csv<R: Read>(reader: R) -> Result<FeatureLibrary> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    for row in csv.deserialize::<LibraryRow>() {
        let row = row?;
        features.push(FeatureRecord {
            id: row.index,
            lab: Some(Lab::new(row.l, row.a, row.b)),
            sorted_position: row.sorted_position,
        });
    }
    FeatureLibrary::new(features)
}

pub fn load_library_csv(path: impl AsRef<Path>) -> Result<FeatureLibrary> {
    read_library_csv(std::fs::File::open(path)?)
}

/// The 71-color UW-71 library, ids `"1"` to `"71"`.
pub fn load_uw71() -> Result<FeatureLibrary> {
    let library =
        read_library_csv(UW71_CSV.as_bytes()).map_err(|e| Error::Integrity(e.to_string()))?;
    if library.len() != UW71_LEN {
        return Err(Error::Integrity(format!(
            "bundle holds {} colors, expected {UW71_LEN}",
            library.len()
        )));
    }
    for (i, f) in library.features().iter().enumerate() {
        if f.id != (i + 1).to_string() || f.lab.is_none() || f.sorted_position.is_none() {
            return Err(Error::Integrity(format!("malformed bundle row {}", i + 1)));
        }
    }
    Ok(library)
}

/// D65 reference white, 2° observer, `Y = 1`.
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

/// XYZ → linear sRGB.
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

/// Slack on the unit interval before a channel counts as out of gamut;
/// absorbs the rounding of the published conversion constants.
const GAMUT_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Srgb {
    pub hex: String,
    pub in_gamut: bool,
}

/// CIELAB → XYZ (D65) → linear RGB → gamma-encoded sRGB, clamped and
/// rounded to 8 bits per channel.
pub fn lab_to_srgb_hex(lab: Lab) -> Result<Srgb> {
    if !(0.0..=100.0).contains(&lab.l) || !lab.a.is_finite() || !lab.b.is_finite() {
        return Err(Error::Argument(format!("L* = {} outside [0, 100]", lab.l)));
    }
    const EPSILON: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let finv = |f: f64| {
        let cube = f * f * f;
        if cube > EPSILON {
            cube
        } else {
            (116.0 * f - 16.0) / KAPPA
        }
    };
    let y = if lab.l > KAPPA * EPSILON {
        fy * fy * fy
    } else {
        lab.l / KAPPA
    };
    let xyz = [
        finv(fx) * WHITE_D65[0],
        y * WHITE_D65[1],
        finv(fz) * WHITE_D65[2],
    ];

    let mut in_gamut = true;
    let mut hex = String::with_capacity(7);
    hex.push('#');
    for row in XYZ_TO_RGB {
        let linear: f64 = row.iter().zip(&xyz).map(|(m, v)| m * v).sum();
        if !(-GAMUT_SLACK..=1.0 + GAMUT_SLACK).contains(&linear) {
            in_gamut = false;
        }
        let linear = linear.clamp(0.0, 1.0);
        let encoded = if linear <= 0.003_130_8 {
            12.92 * linear
        } else {
            1.055 * linear.powf(1.0 / 2.4) - 0.055
        };
        let byte = (encoded.clamp(0.0, 1.0) * 255.0).round() as u8;
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(Srgb { hex, in_gamut })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub concept: String,
    pub feature: String,
    pub lab: Lab,
    pub hex: String,
    pub in_gamut: bool,
    pub association: f64,
    pub semantic_contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteOutput {
    pub entries: Vec<PaletteEntry>,
    pub generalized_semantic_distance: f64,
    pub max_capacity: f64,
    pub seed: u64,
    pub samples: usize,
}

/// Balanced-merit palette for the given concepts, rendered from `library`.
///
/// Features are matched to library records by id.
pub fn build_palette(
    table: &AssociationTable,
    concepts: &[usize],
    library: &FeatureLibrary,
    config: &MonteCarloConfig,
) -> Result<PaletteOutput> {
    let report = max_capacity(table, concepts, config)?;
    let all: Vec<usize> = (0..concepts.len()).collect();
    let restricted = table
        .restrict_concepts(concepts)?
        .restrict(&report.chosen_indices, &all)?;
    let simulation = simulate(&restricted, config)?;

    let mut entries = Vec::with_capacity(concepts.len());
    for (j, (concept, feature)) in report
        .concepts
        .iter()
        .zip(&report.chosen_features)
        .enumerate()
    {
        let record = library.get(library.index_of(feature)?);
        let lab = record.lab.ok_or_else(|| {
            Error::Argument(format!("feature `{feature}` has no CIELAB coordinates"))
        })?;
        let color = lab_to_srgb_hex(lab)?;
        entries.push(PaletteEntry {
            concept: concept.clone(),
            feature: feature.clone(),
            lab,
            hex: color.hex,
            in_gamut: color.in_gamut,
            association: restricted.get(j, j),
            semantic_contrast: simulation.contrast[j],
        });
    }
    Ok(PaletteOutput {
        entries,
        generalized_semantic_distance: simulation.delta_s,
        max_capacity: report.max_capacity,
        seed: config.seed,
        samples: config.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "feature_id,apple,banana\nred,0.9,0.1\nyellow,0.2,0.95\ngray,0.3,0.3\n";

    #[test]
    fn reads_fixture() {
        let t = read_association_csv(FIXTURE.as_bytes()).unwrap();
        assert_eq!((t.n_features(), t.n_concepts()), (3, 2));
        assert_eq!(
            t.concepts().ids(),
            &["apple".to_string(), "banana".to_string()]
        );
        assert_eq!(t.library().get(1).id, "yellow");
        assert_eq!(t.get(1, 1), 0.95);
    }

    #[test]
    fn rejects_out_of_range_cell() {
        let bad = "feature_id,a,b\nx,0.5,0.5\ny,1.3,0.1\n";
        match read_association_csv(bad.as_bytes()).unwrap_err() {
            Error::Validation { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_duplicates() {
        let bad = "id,a,b\nx,0.5,0.5\ny,0.3,0.1\n";
        assert!(matches!(
            read_association_csv(bad.as_bytes()),
            Err(Error::Format(_))
        ));
        let dup = "feature_id,a,b\nx,0.5,0.5\nx,0.3,0.1\n";
        assert!(matches!(
            read_association_csv(dup.as_bytes()),
            Err(Error::Validation { .. })
        ));
        let text = "feature_id,a,b\nx,0.5,abc\ny,0.3,0.1\n";
        assert!(matches!(
            read_association_csv(text.as_bytes()),
            Err(Error::Validation { .. })
        ));
        assert!(read_association_csv("".as_bytes()).is_err());
    }

    #[test]
    fn uw71_bundle() {
        let lib = load_uw71().unwrap();
        assert_eq!(lib.len(), 71);
        assert_eq!(lib.get(24).lab, Some(Lab::new(0.0, 0.0, 0.0)));
        assert_eq!(lib.get(28).lab, Some(Lab::new(100.0, 0.0, 0.0)));
        assert_eq!(lib.get(28).sorted_position, Some(1));
        assert_eq!(lib.get(0).lab, Some(Lab::new(50.0, 28.891, -73.589)));
    }

    #[test]
    fn lab_extremes() {
        let black = lab_to_srgb_hex(Lab::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            black,
            Srgb {
                hex: "#000000".into(),
                in_gamut: true
            }
        );
        let white = lab_to_srgb_hex(Lab::new(100.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            white,
            Srgb {
                hex: "#ffffff".into(),
                in_gamut: true
            }
        );
        assert!(lab_to_srgb_hex(Lab::new(-1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn lab_matches_reference_conversion() {
        // skimage.color.lab2rgb (D65, 2°), clipped and rounded.
        let cases = [
            (Lab::new(50.0, 80.0, -80.0), [0xad, 0x30, 0xff], false),
            (Lab::new(50.0, 28.891, -73.589), [0x2f, 0x6e, 0xf6], true),
            (Lab::new(88.0, -49.931, -2.6168), [0x39, 0xf6, 0xe0], true),
        ];
        for (lab, expected, in_gamut) in cases {
            let out = lab_to_srgb_hex(lab).unwrap();
            assert_eq!(out.in_gamut, in_gamut, "{lab:?}");
            for (k, want) in expected.iter().enumerate() {
                let got = u8::from_str_radix(&out.hex[1 + 2 * k..3 + 2 * k], 16).unwrap();
                assert!((got as i32 - *want).abs() <= 1, "{lab:?}: {}", out.hex);
            }
        }
    }
}
