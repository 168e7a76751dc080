use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

pub const MIN_BIRTH_YEAR: i32 = -3000;
pub const MAX_BIRTH_YEAR: i32 = 2100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "attribute", rename_all = "camelCase")]
pub enum LiteralValue {
    BirthYear { year: i32 },
    AreaKm2 { km2: f64 },
    Population { count: u64 },
    Revenue { amount: f64, currency: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteralFact {
    pub entity: String,
    pub value: LiteralValue,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Literals {
    pub facts: Vec<LiteralFact>,
    /// Rows whose attribute name was not recognised.
    pub skipped_unknown: usize,
}

impl Literals {
    /// First reported birth year per entity.
    pub fn birth_years(&self) -> BTreeMap<&str, i32> {
        self.first_by(|v| match v {
            LiteralValue::BirthYear { year } => Some(*year),
            _ => None,
        })
    }

    pub fn areas(&self) -> BTreeMap<&str, f64> {
        self.first_by(|v| match v {
            LiteralValue::AreaKm2 { km2 } => Some(*km2),
            _ => None,
        })
    }

    pub fn populations(&self) -> BTreeMap<&str, f64> {
        self.first_by(|v| match v {
            LiteralValue::Population { count } => Some(*count as f64),
            _ => None,
        })
    }

    /// First reported (amount, currency) per entity.
    pub fn revenues(&self) -> BTreeMap<&str, (f64, &str)> {
        self.first_by(|v| match v {
            LiteralValue::Revenue { amount, currency } => Some((*amount, currency.as_str())),
            _ => None,
        })
    }

    fn first_by<'a, T>(
        &'a self,
        pick: impl Fn(&'a LiteralValue) -> Option<T>,
    ) -> BTreeMap<&'a str, T> {
        let mut out = BTreeMap::new();
        for fact in &self.facts {
            if let Some(v) = pick(&fact.value) {
                out.entry(fact.entity.as_str()).or_insert(v);
            }
        }
        out
    }
}

fn parse_real(raw: &str, source_name: &str, n: usize) -> Result<f64> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(
            source_name,
            n,
            format!("non-numeric value {raw:?}"),
        )),
    }
}

fn non_negative(v: f64, what: &str, source_name: &str, n: usize) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::parse(
            source_name,
            n,
            format!("{what} must be >= 0, got {v}"),
        ));
    }
    Ok(v)
}

/// Parses `entity<TAB>attribute<TAB>value[<TAB>unit]` rows.
pub fn parse_literals<R: BufRead>(reader: R, source_name: &str) -> Result<Literals> {
    let mut out = Literals::default();
    for line in textio::numbered_lines(reader, source_name) {
        let (n, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(
                source_name,
                n,
                "expected entity, attribute, value[, unit]",
            ));
        }
        let (entity, attribute, raw) = (fields[0], fields[1], fields[2]);
        let unit = fields.get(3).map(|u| u.trim()).filter(|u| !u.is_empty());
        let value = match attribute {
            "birthYear" => {
                let v = parse_real(raw, source_name, n)?;
                if v.fract() != 0.0 {
                    return Err(Error::parse(
                        source_name,
                        n,
                        format!("birth year {raw:?} is not an integer"),
                    ));
                }
                let year = v as i64;
                if !(i64::from(MIN_BIRTH_YEAR)..=i64::from(MAX_BIRTH_YEAR)).contains(&year) {
                    return Err(Error::parse(
                        source_name,
                        n,
                        format!("birth year {year} out of range"),
                    ));
                }
                LiteralValue::BirthYear { year: year as i32 }
            }
            "areaKm2" => LiteralValue::AreaKm2 {
                km2: non_negative(parse_real(raw, source_name, n)?, "area", source_name, n)?,
            },
            "population" => {
                let v = non_negative(
                    parse_real(raw, source_name, n)?,
                    "population",
                    source_name,
                    n,
                )?;
                if v.fract() != 0.0 {
                    return Err(Error::parse(
                        source_name,
                        n,
                        format!("population {raw:?} is not an integer"),
                    ));
                }
                LiteralValue::Population { count: v as u64 }
            }
            "revenue" => {
                let amount =
                    non_negative(parse_real(raw, source_name, n)?, "revenue", source_name, n)?;
                let currency = unit
                    .ok_or_else(|| Error::parse(source_name, n, "revenue requires a currency"))?;
                LiteralValue::Revenue {
                    amount,
                    currency: currency.to_owned(),
                }
            }
            _ => {
                out.skipped_unknown += 1;
                continue;
            }
        };
        out.facts.push(LiteralFact {
            entity: entity.to_owned(),
            value,
        });
    }
    Ok(out)
}

pub fn ingest_literals(path: &Path) -> Result<Literals> {
    parse_literals(textio::open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Literals> {
        parse_literals(s.as_bytes(), "lits")
    }

    #[test]
    fn birth_year_parses() {
        let l = parse("E\tbirthYear\t1879\n").unwrap();
        assert_eq!(l.facts[0].value, LiteralValue::BirthYear { year: 1879 });
    }

    #[test]
    fn revenue_with_currency() {
        let l = parse("E\trevenue\t5.2e9\tUSD\n").unwrap();
        assert_eq!(
            l.facts[0].value,
            LiteralValue::Revenue {
                amount: 5.2e9,
                currency: "USD".into()
            }
        );
    }

    #[test]
    fn revenue_without_currency_rejected() {
        assert!(parse("E\trevenue\t100\n").is_err());
    }

    #[test]
    fn non_numeric_rejected() {
        assert!(parse("E\tareaKm2\tbig\n").is_err());
        assert!(parse("E\tpopulation\t-4\n").is_err());
        assert!(parse("E\tbirthYear\t2300\n").is_err());
    }

    #[test]
    fn unknown_attribute_skipped() {
        let l = parse("E\tshoeSize\t44\nE\tpopulation\t12\n").unwrap();
        assert_eq!(l.skipped_unknown, 1);
        assert_eq!(l.populations()["E"], 12.0);
    }
}
