//! Quote ingestion, volume-weighted mid-prices, daily realized volatility,
//! and standardized per-stock RV panels.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One five-minute order-book snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteTick {
    pub day_index: u32,
    pub slot_index: u32,
    pub bid_price: f64,
    pub bid_volume: f64,
    pub ask_price: f64,
    pub ask_volume: f64,
}

impl QuoteTick {
    pub fn validate(&self) -> Result<()> {
        if !(self.bid_price > 0.0 && self.ask_price > 0.0) {
            return Err(Error::Input("quote prices must be positive".into()));
        }
        if self.bid_price >= self.ask_price {
            return Err(Error::Input(format!(
                "crossed quote: bid {} >= ask {}",
                self.bid_price, self.ask_price
            )));
        }
        if self.bid_volume < 0.0 || self.ask_volume < 0.0 {
            return Err(Error::Input("quote volumes must be nonnegative".into()));
        }
        if self.bid_volume + self.ask_volume <= 0.0 {
            return Err(Error::Input("quote has zero total volume".into()));
        }
        Ok(())
    }
}

/// All ticks of one trading day, ordered by slot.
#[derive(Debug, Clone)]
pub struct DayQuotes {
    pub day_index: u32,
    pub ticks: Vec<QuoteTick>,
}

impl DayQuotes {
    pub fn new(day_index: u32, ticks: Vec<QuoteTick>) -> Result<Self> {
        for pair in ticks.windows(2) {
            if pair[1].slot_index <= pair[0].slot_index {
                return Err(Error::Input(format!(
                    "day {day_index}: slot indices must be strictly increasing"
                )));
            }
        }
        if ticks.iter().any(|t| t.day_index != day_index) {
            return Err(Error::Input(format!(
                "day {day_index}: tick with mismatched day index"
            )));
        }
        Ok(DayQuotes { day_index, ticks })
    }
}

/// Volume-weighted mid-price: the bid price is weighted by the bid volume.
pub fn mid_price(tick: &QuoteTick) -> Result<f64> {
    tick.validate()?;
    let alpha = tick.bid_volume / (tick.ask_volume + tick.bid_volume);
    Ok(alpha * tick.bid_price + (1.0 - alpha) * tick.ask_price)
}

/// Daily realized volatility: root of summed squared intraday log mid-price
/// returns. Overnight gaps never enter because each day is summed alone.
pub fn daily_rv(day: &DayQuotes) -> Result<f64> {
    if day.ticks.len() < 2 {
        return Err(Error::Degenerate(format!(
            "day {}: realized volatility needs at least 2 ticks, got {}",
            day.day_index,
            day.ticks.len()
        )));
    }
    let mids = day
        .ticks
        .iter()
        .map(mid_price)
        .collect::<Result<Vec<f64>>>()?;
    daily_rv_from_prices(&mids)
}

/// Same computation starting from precomputed intraday prices (schema B).
pub fn daily_rv_from_prices(prices: &[f64]) -> Result<f64> {
    if prices.len() < 2 {
        return Err(Error::Degenerate(
            "realized volatility needs at least 2 intraday prices".into(),
        ));
    }
    if prices.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::Input("intraday prices must be positive and finite".into()));
    }
    let sum_sq: f64 = prices
        .windows(2)
        .map(|w| {
            let r = (w[1] / w[0]).ln();
            r * r
        })
        .sum();
    Ok(sum_sq.sqrt())
}

/// z-score a series; returns (standardized, mean, population variance).
pub fn standardize(raw: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if raw.len() < 2 {
        return Err(Error::Degenerate(
            "standardization needs at least 2 observations".into(),
        ));
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let variance = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if variance <= 0.0 || !variance.is_finite() {
        return Err(Error::Degenerate(
            "cannot standardize a constant (zero-variance) series".into(),
        ));
    }
    let sd = variance.sqrt();
    Ok((raw.iter().map(|v| (v - mean) / sd).collect(), mean, variance))
}

/// One stock's standardized RV series plus the parameters to undo it.
#[derive(Debug, Clone)]
pub struct RvSeries {
    pub symbol: String,
    pub values: Vec<f64>,
    pub raw_mean: f64,
    pub raw_variance: f64,
}

impl RvSeries {
    pub fn from_raw(symbol: impl Into<String>, raw: &[f64]) -> Result<Self> {
        let (values, raw_mean, raw_variance) = standardize(raw)?;
        Ok(RvSeries { symbol: symbol.into(), values, raw_mean, raw_variance })
    }

    pub fn destandardize(&self, v: f64) -> f64 {
        v * self.raw_variance.sqrt() + self.raw_mean
    }
}

/// Chronological train/validation/test lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train_len: usize,
    pub valid_len: usize,
    pub test_len: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_len: 300, valid_len: 60, test_len: 120 }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train_len + self.valid_len + self.test_len
    }

    pub fn validate(&self) -> Result<()> {
        // The monthly lag needs 22 prior timesteps plus one target.
        if self.train_len < 23 {
            return Err(Error::Input(format!(
                "train_len must be >= 23, got {}",
                self.train_len
            )));
        }
        if self.valid_len == 0 || self.test_len == 0 {
            return Err(Error::Input("valid_len and test_len must be positive".into()));
        }
        Ok(())
    }
}

/// Standardized RV series of every stock plus the split layout.
#[derive(Debug, Clone)]
pub struct RvPanel {
    pub series: Vec<RvSeries>,
    pub split: SplitSpec,
}

impl RvPanel {
    pub fn new(series: Vec<RvSeries>, split: SplitSpec) -> Result<Self> {
        split.validate()?;
        if series.is_empty() {
            return Err(Error::Input("panel needs at least one series".into()));
        }
        let t = series[0].values.len();
        for s in &series {
            if s.values.len() != t {
                return Err(Error::Input(format!(
                    "series lengths differ: {} has {}, {} has {}",
                    series[0].symbol,
                    t,
                    s.symbol,
                    s.values.len()
                )));
            }
        }
        if split.total() > t {
            return Err(Error::Input(format!(
                "split total {} exceeds series length {}",
                split.total(),
                t
            )));
        }
        Ok(RvPanel { series, split })
    }

    pub fn len_t(&self) -> usize {
        self.series[0].values.len()
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.split.train_len
    }

    pub fn valid_range(&self) -> std::ops::Range<usize> {
        self.split.train_len..self.split.train_len + self.split.valid_len
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        let start = self.split.train_len + self.split.valid_len;
        start..start + self.split.test_len
    }
}

/// Input layout for `ingest_quotes`: full order-book snapshots (A) or
/// precomputed intraday prices (B).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteSchema {
    A,
    B,
}

const HEADER_A: &str = "symbol,day,slot,bid_price,bid_volume,ask_price,ask_volume";
const HEADER_B: &str = "symbol,day,slot,price";
const HEADER_RV: &str = "symbol,day,rv_raw";

/// Per-symbol raw (unstandardized) daily RV, days ascending.
#[derive(Debug, Clone)]
pub struct RawRvSeries {
    pub symbol: String,
    pub days: Vec<u32>,
    pub values: Vec<f64>,
}

fn parse_f64(field: &str, name: &str, row: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Input(format!("row {row}: cannot parse {name} from {field:?}"))
    })
}

fn parse_u32(field: &str, name: &str, row: usize) -> Result<u32> {
    field.trim().parse::<u32>().map_err(|_| {
        Error::Input(format!("row {row}: cannot parse {name} from {field:?}"))
    })
}

/// Compute raw daily RV per symbol from a quote CSV.
pub fn compute_raw_rv(path: &Path, schema: QuoteSchema) -> Result<Vec<RawRvSeries>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    compute_raw_rv_from_str(&text, schema)
}

pub fn compute_raw_rv_from_str(text: &str, schema: QuoteSchema) -> Result<Vec<RawRvSeries>> {
    let mut lines = text.lines().enumerate();
    let expected = match schema {
        QuoteSchema::A => HEADER_A,
        QuoteSchema::B => HEADER_B,
    };
    match lines.next() {
        Some((_, h)) if h.trim() == expected => {}
        Some((_, h)) => {
            return Err(Error::Input(format!(
                "unexpected header {h:?}; expected {expected:?}"
            )))
        }
        None => return Err(Error::Input("empty quote file".into())),
    }

    // symbol -> day -> (slot, intraday price)
    let mut grouped: BTreeMap<String, BTreeMap<u32, Vec<(u32, f64)>>> = BTreeMap::new();
    for (i, line) in lines {
        let row = i + 1; // 1-based, header is row 1
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let (symbol, day, slot, price) = match schema {
            QuoteSchema::A => {
                if fields.len() != 7 {
                    return Err(Error::Input(format!(
                        "row {row}: expected 7 fields, got {}",
                        fields.len()
                    )));
                }
                let tick = QuoteTick {
                    day_index: parse_u32(fields[1], "day", row)?,
                    slot_index: parse_u32(fields[2], "slot", row)?,
                    bid_price: parse_f64(fields[3], "bid_price", row)?,
                    bid_volume: parse_f64(fields[4], "bid_volume", row)?,
                    ask_price: parse_f64(fields[5], "ask_price", row)?,
                    ask_volume: parse_f64(fields[6], "ask_volume", row)?,
                };
                let mid = mid_price(&tick)
                    .map_err(|e| Error::Input(format!("row {row}: {e}")))?;
                (fields[0].trim(), tick.day_index, tick.slot_index, mid)
            }
            QuoteSchema::B => {
                if fields.len() != 4 {
                    return Err(Error::Input(format!(
                        "row {row}: expected 4 fields, got {}",
                        fields.len()
                    )));
                }
                let price = parse_f64(fields[3], "price", row)?;
                if !(price > 0.0) || !price.is_finite() {
                    return Err(Error::Input(format!(
                        "row {row}: price must be positive and finite"
                    )));
                }
                (
                    fields[0].trim(),
                    parse_u32(fields[1], "day", row)?,
                    parse_u32(fields[2], "slot", row)?,
                    price,
                )
            }
        };
        if symbol.is_empty() {
            return Err(Error::Input(format!("row {row}: empty symbol")));
        }
        if day == 0 || slot == 0 {
            return Err(Error::Input(format!(
                "row {row}: day and slot indices are 1-based"
            )));
        }
        grouped
            .entry(symbol.to_string())
            .or_default()
            .entry(day)
            .or_default()
            .push((slot, price));
    }
    if grouped.is_empty() {
        return Err(Error::Input("quote file contains no data rows".into()));
    }

    // All symbols must share the same day axis.
    let reference_days: Vec<u32> = grouped.values().next().unwrap().keys().copied().collect();
    let mut offenders = Vec::new();
    for (symbol, days) in &grouped {
        let mine: Vec<u32> = days.keys().copied().collect();
        if mine != reference_days {
            offenders.push(symbol.clone());
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Input(format!(
            "symbols with mismatched day coverage: {}",
            offenders.join(", ")
        )));
    }

    let mut out = Vec::with_capacity(grouped.len());
    for (symbol, days) in grouped {
        let mut day_idx = Vec::with_capacity(days.len());
        let mut values = Vec::with_capacity(days.len());
        for (day, mut slots) in days {
            slots.sort_by_key(|&(s, _)| s);
            for pair in slots.windows(2) {
                if pair[1].0 == pair[0].0 {
                    return Err(Error::Input(format!(
                        "{symbol} day {day}: duplicate slot {}",
                        pair[0].0
                    )));
                }
            }
            if slots.len() < 2 {
                return Err(Error::Degenerate(format!(
                    "{symbol} day {day}: {} tick(s), at least 2 required",
                    slots.len()
                )));
            }
            let prices: Vec<f64> = slots.iter().map(|&(_, p)| p).collect();
            day_idx.push(day);
            values.push(daily_rv_from_prices(&prices)?);
        }
        out.push(RawRvSeries { symbol, days: day_idx, values });
    }
    Ok(out)
}

/// Build a standardized panel from raw series, checking the split fits.
pub fn panel_from_raw(raw: &[RawRvSeries], split: SplitSpec) -> Result<RvPanel> {
    split.validate()?;
    let short: Vec<&str> = raw
        .iter()
        .filter(|s| s.values.len() < split.total())
        .map(|s| s.symbol.as_str())
        .collect();
    if !short.is_empty() {
        return Err(Error::Input(format!(
            "series shorter than the split total {}: {}",
            split.total(),
            short.join(", ")
        )));
    }
    let series = raw
        .iter()
        .map(|s| RvSeries::from_raw(&s.symbol, &s.values))
        .collect::<Result<Vec<_>>>()?;
    RvPanel::new(series, split)
}

/// Quote file straight to a standardized panel.
pub fn ingest_quotes(path: &Path, schema: QuoteSchema, split: SplitSpec) -> Result<RvPanel> {
    let raw = compute_raw_rv(path, schema)?;
    panel_from_raw(&raw, split)
}

/// Write `symbol,day,rv_raw` rows plus the standardization sidecar
/// (`<stem>.standardization.json`).
pub fn write_rv_csv(path: &Path, raw: &[RawRvSeries]) -> Result<()> {
    let mut out = String::from(HEADER_RV);
    out.push('\n');
    for series in raw {
        for (day, value) in series.days.iter().zip(&series.values) {
            out.push_str(&format!("{},{},{}\n", series.symbol, day, value));
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;

    let mut sidecar = BTreeMap::new();
    for series in raw {
        let (_, mean, variance) = standardize(&series.values)?;
        sidecar.insert(
            series.symbol.clone(),
            serde_json::json!({ "mean": mean, "variance": variance }),
        );
    }
    let sidecar_path = sidecar_path(path);
    std::fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

pub fn sidecar_path(rv_path: &Path) -> std::path::PathBuf {
    let stem = rv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("rv");
    rv_path.with_file_name(format!("{stem}.standardization.json"))
}

/// Read a `symbol,day,rv_raw` file back into raw series.
pub fn load_rv_csv(path: &Path) -> Result<Vec<RawRvSeries>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    load_rv_csv_from_str(&text)
}

pub fn load_rv_csv_from_str(text: &str) -> Result<Vec<RawRvSeries>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER_RV => {}
        Some((_, h)) => {
            return Err(Error::Input(format!(
                "unexpected header {h:?}; expected {HEADER_RV:?}"
            )))
        }
        None => return Err(Error::Input("empty RV file".into())),
    }
    let mut grouped: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for (i, line) in lines {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Input(format!(
                "row {row}: expected 3 fields, got {}",
                fields.len()
            )));
        }
        let symbol = fields[0].trim();
        if symbol.is_empty() {
            return Err(Error::Input(format!("row {row}: empty symbol")));
        }
        let day = parse_u32(fields[1], "day", row)?;
        let rv = parse_f64(fields[2], "rv_raw", row)?;
        if !rv.is_finite() {
            return Err(Error::Input(format!("row {row}: rv_raw must be finite")));
        }
        if grouped.entry(symbol.to_string()).or_default().insert(day, rv).is_some() {
            return Err(Error::Input(format!(
                "row {row}: duplicate (symbol, day) = ({symbol}, {day})"
            )));
        }
    }
    if grouped.is_empty() {
        return Err(Error::Input("RV file contains no data rows".into()));
    }
    let reference_days: Vec<u32> = grouped.values().next().unwrap().keys().copied().collect();
    let mut offenders = Vec::new();
    for (symbol, days) in &grouped {
        let mine: Vec<u32> = days.keys().copied().collect();
        if mine != reference_days {
            offenders.push(symbol.clone());
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Input(format!(
            "symbols with mismatched day coverage: {}",
            offenders.join(", ")
        )));
    }
    Ok(grouped
        .into_iter()
        .map(|(symbol, days)| RawRvSeries {
            symbol,
            days: days.keys().copied().collect(),
            values: days.values().copied().collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(bid: f64, bid_vol: f64, ask: f64, ask_vol: f64) -> QuoteTick {
        QuoteTick {
            day_index: 1,
            slot_index: 1,
            bid_price: bid,
            bid_volume: bid_vol,
            ask_price: ask,
            ask_volume: ask_vol,
        }
    }

    #[test]
    fn mid_price_symmetric_and_boundary() {
        assert_eq!(mid_price(&tick(100.0, 5.0, 102.0, 5.0)).unwrap(), 101.0);
        // all weight on the ask when the bid volume vanishes
        assert_eq!(mid_price(&tick(100.0, 0.0, 102.0, 5.0)).unwrap(), 102.0);
        // alpha = 3/4: 0.75·100 + 0.25·104
        assert_eq!(mid_price(&tick(100.0, 3.0, 104.0, 1.0)).unwrap(), 101.0);
    }

    #[test]
    fn mid_price_rejects_bad_quotes() {
        assert!(mid_price(&tick(100.0, 0.0, 102.0, 0.0)).is_err());
        assert!(mid_price(&tick(103.0, 1.0, 102.0, 1.0)).is_err());
    }

    #[test]
    fn mid_price_is_a_convex_combination() {
        let mut rng = crate::rng::Rng::new(11);
        for _ in 0..500 {
            let bid = 50.0 + 100.0 * rng.uniform();
            let ask = bid + 0.01 + 5.0 * rng.uniform();
            let bv = rng.uniform() * 10.0;
            let av = rng.uniform() * 10.0 + 1e-9;
            let m = mid_price(&tick(bid, bv, ask, av)).unwrap();
            assert!(m >= bid && m <= ask, "mid {m} outside [{bid}, {ask}]");
        }
    }

    fn day_from_prices(prices: &[f64]) -> DayQuotes {
        let ticks = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| QuoteTick {
                day_index: 1,
                slot_index: i as u32 + 1,
                bid_price: p - 0.005,
                bid_volume: 1.0,
                ask_price: p + 0.005,
                ask_volume: 1.0,
            })
            .collect();
        DayQuotes::new(1, ticks).unwrap()
    }

    #[test]
    fn daily_rv_known_values() {
        // constant price: zero
        assert!(daily_rv(&day_from_prices(&[100.0, 100.0, 100.0])).unwrap() < 1e-15);
        // single log return of 0.01
        let rv = daily_rv_from_prices(&[100.0, 100.0 * 0.01f64.exp()]).unwrap();
        assert!((rv - 0.01).abs() < 1e-12);
        // log returns {0.03, -0.01}: sqrt(9e-4 + 1e-4)
        let p = [100.0, 100.0 * 0.03f64.exp(), 100.0 * (0.03f64 - 0.01).exp()];
        let rv = daily_rv_from_prices(&p).unwrap();
        assert!((rv - 1e-3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn daily_rv_rejects_single_tick() {
        let day = DayQuotes::new(
            1,
            vec![QuoteTick {
                day_index: 1,
                slot_index: 1,
                bid_price: 99.0,
                bid_volume: 1.0,
                ask_price: 100.0,
                ask_volume: 1.0,
            }],
        )
        .unwrap();
        assert!(matches!(daily_rv(&day), Err(Error::Degenerate(_))));
    }

    #[test]
    fn daily_rv_scale_invariant() {
        let mut rng = crate::rng::Rng::new(5);
        let prices: Vec<f64> = (0..50).map(|_| 80.0 + 40.0 * rng.uniform()).collect();
        let base = daily_rv_from_prices(&prices).unwrap();
        for &c in &[0.01, 3.0, 1234.5] {
            let scaled: Vec<f64> = prices.iter().map(|p| c * p).collect();
            let rv = daily_rv_from_prices(&scaled).unwrap();
            assert!((rv - base).abs() < 1e-12, "c={c}: {rv} vs {base}");
        }
    }

    #[test]
    fn standardize_known_and_round_trip() {
        let (z, mean, var) = standardize(&[1.0, 3.0]).unwrap();
        assert_eq!(mean, 2.0);
        assert_eq!(var, 1.0);
        assert_eq!(z, vec![-1.0, 1.0]);

        assert!(matches!(standardize(&[2.0, 2.0, 2.0]), Err(Error::Degenerate(_))));

        let mut rng = crate::rng::Rng::new(9);
        let raw: Vec<f64> = (0..100).map(|_| rng.normal() * 3.0 + 7.0).collect();
        let series = RvSeries::from_raw("X", &raw).unwrap();
        for (orig, z) in raw.iter().zip(&series.values) {
            assert!((series.destandardize(*z) - orig).abs() < 1e-12);
        }
        // idempotence: standardizing an already standardized series changes nothing
        let (z2, m2, v2) = standardize(&series.values).unwrap();
        assert!(m2.abs() < 1e-12 && (v2 - 1.0).abs() < 1e-9);
        for (a, b) in series.values.iter().zip(&z2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn sample_quote_csv() -> String {
        let mut s = String::from("symbol,day,slot,bid_price,bid_volume,ask_price,ask_volume\n");
        for sym in ["AAA", "BBB"] {
            for day in 1..=3u32 {
                for slot in 1..=4u32 {
                    let px = 100.0 + day as f64 + 0.1 * slot as f64;
                    s.push_str(&format!(
                        "{sym},{day},{slot},{},{},{},{}\n",
                        px - 0.05,
                        1.0 + slot as f64,
                        px + 0.05,
                        2.0
                    ));
                }
            }
        }
        s
    }

    #[test]
    fn ingest_happy_path_two_symbols() {
        let raw = compute_raw_rv_from_str(&sample_quote_csv(), QuoteSchema::A).unwrap();
        assert_eq!(raw.len(), 2);
        assert_eq!(raw[0].symbol, "AAA");
        assert_eq!(raw[0].values.len(), 3);
    }

    #[test]
    fn ingest_reports_crossed_quote_row() {
        let mut csv = sample_quote_csv();
        csv.push_str("AAA,4,1,101.0,1.0,100.0,1.0\n");
        csv.push_str("AAA,4,2,101.0,1.0,102.0,1.0\n");
        let err = compute_raw_rv_from_str(&csv, QuoteSchema::A).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 26") && msg.contains("crossed"), "{msg}");
    }

    #[test]
    fn ingest_rejects_unequal_day_counts() {
        let mut csv = sample_quote_csv();
        csv.push_str("AAA,4,1,100.0,1.0,100.5,1.0\nAAA,4,2,100.1,1.0,100.6,1.0\n");
        let err = compute_raw_rv_from_str(&csv, QuoteSchema::A).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("day coverage"), "{msg}");
        assert!(msg.contains("AAA") || msg.contains("BBB"), "{msg}");
    }

    #[test]
    fn schema_b_round_trips_through_rv_csv() {
        let mut csv = String::from("symbol,day,slot,price\n");
        for day in 1..=30u32 {
            for slot in 1..=3u32 {
                csv.push_str(&format!(
                    "XYZ,{day},{slot},{}\n",
                    100.0 + (day as f64 * 0.7 + slot as f64).sin()
                ));
            }
        }
        let raw = compute_raw_rv_from_str(&csv, QuoteSchema::B).unwrap();
        assert_eq!(raw.len(), 1);
        assert_eq!(raw[0].values.len(), 30);

        let dir = std::env::temp_dir().join(format!("volaflow_md_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rv.csv");
        write_rv_csv(&path, &raw).unwrap();
        assert!(sidecar_path(&path).exists());
        let loaded = load_rv_csv(&path).unwrap();
        assert_eq!(loaded[0].symbol, "XYZ");
        for (a, b) in loaded[0].values.iter().zip(&raw[0].values) {
            assert_eq!(a, b, "rv values must round-trip bit-exactly");
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn panel_split_validation() {
        let raw: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
        let series = vec![RvSeries::from_raw("A", &raw).unwrap()];
        let split = SplitSpec { train_len: 23, valid_len: 5, test_len: 5 };
        let panel = RvPanel::new(series.clone(), split).unwrap();
        assert_eq!(panel.train_range(), 0..23);
        assert_eq!(panel.valid_range(), 23..28);
        assert_eq!(panel.test_range(), 28..33);

        let bad = SplitSpec { train_len: 22, valid_len: 5, test_len: 5 };
        assert!(RvPanel::new(series.clone(), bad).is_err());
        let too_long = SplitSpec { train_len: 35, valid_len: 5, test_len: 5 };
        assert!(RvPanel::new(series, too_long).is_err());
    }
}
