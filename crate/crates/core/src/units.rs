//! Physical quantities normalized to SI.
//!
//! A [`Quantity`] is an `f64` magnitude expressed in SI base units together
//! with a [`Dimension`]. Unit text such as `"18 L"` or `"0.67 ft**3"` is
//! resolved through a [`UnitRegistry`]; the standard registry covers SI base
//! and derived units plus the customary units that show up in Fermi problems.
//!
//! Information (bytes) and currency (USD) are modelled as two extra
//! independent dimensions with no conversion between them and anything else.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Div, Mul};
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

/// Relative tolerance used by `Quantity` equality.
pub const REL_TOL: f64 = 1e-9;

const N_DIMS: usize = 9;

// Index order of the exponent vector.
const LENGTH: usize = 0;
const MASS: usize = 1;
const TIME: usize = 2;
const CURRENT: usize = 3;
const TEMPERATURE: usize = 4;
const AMOUNT: usize = 5;
const LUMINOUS: usize = 6;
const INFORMATION: usize = 7;
const CURRENCY: usize = 8;

const BASE_SYMBOLS: [&str; N_DIMS] = ["m", "kg", "s", "A", "K", "mol", "cd", "B", "USD"];
// kg first so that densities render as "kg m**-3".
const RENDER_ORDER: [usize; N_DIMS] = [
    MASS,
    LENGTH,
    TIME,
    CURRENT,
    TEMPERATURE,
    AMOUNT,
    LUMINOUS,
    INFORMATION,
    CURRENCY,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("no numeric literal at the start of {0:?}")]
    UnparsableNumber(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("malformed unit expression {0:?}")]
    MalformedUnit(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: Dimension, right: Dimension },
    #[error("non-finite magnitude")]
    NonFinite,
    #[error("registry file line {line}: {reason}")]
    RegistryFile { line: usize, reason: String },
    #[error("reading registry file: {0}")]
    Io(String),
}

/// Exponents over the seven SI base dimensions plus information and currency.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Dimension([i8; N_DIMS]);

impl Dimension {
    pub const DIMENSIONLESS: Dimension = Dimension([0; N_DIMS]);
    pub const LENGTH: Dimension = Dimension::base(LENGTH);
    pub const MASS: Dimension = Dimension::base(MASS);
    pub const TIME: Dimension = Dimension::base(TIME);
    pub const CURRENT: Dimension = Dimension::base(CURRENT);
    pub const TEMPERATURE: Dimension = Dimension::base(TEMPERATURE);
    pub const AMOUNT: Dimension = Dimension::base(AMOUNT);
    pub const LUMINOUS_INTENSITY: Dimension = Dimension::base(LUMINOUS);
    pub const INFORMATION: Dimension = Dimension::base(INFORMATION);
    pub const CURRENCY: Dimension = Dimension::base(CURRENCY);

    const fn base(i: usize) -> Dimension {
        let mut e = [0; N_DIMS];
        e[i] = 1;
        Dimension(e)
    }

    pub const fn from_exponents(exponents: [i8; N_DIMS]) -> Dimension {
        Dimension(exponents)
    }

    pub fn exponents(&self) -> [i8; N_DIMS] {
        self.0
    }

    pub fn is_dimensionless(&self) -> bool {
        self.0 == [0; N_DIMS]
    }

    pub fn powi(self, n: i32) -> Dimension {
        let mut e = self.0;
        for x in e.iter_mut() {
            *x = (*x as i32 * n) as i8;
        }
        Dimension(e)
    }

    /// Canonical SI unit text for this dimension, e.g. `"kg m**-3"`.
    /// Empty for the dimensionless case.
    pub fn si_unit(&self) -> String {
        let mut parts = Vec::new();
        for &i in RENDER_ORDER.iter() {
            match self.0[i] {
                0 => {}
                1 => parts.push(BASE_SYMBOLS[i].to_string()),
                e => parts.push(format!("{}**{}", BASE_SYMBOLS[i], e)),
            }
        }
        parts.join(" ")
    }
}

impl Mul for Dimension {
    type Output = Dimension;
    fn mul(self, rhs: Dimension) -> Dimension {
        let mut e = self.0;
        for (a, b) in e.iter_mut().zip(rhs.0) {
            *a += b;
        }
        Dimension(e)
    }
}

impl Div for Dimension {
    type Output = Dimension;
    fn div(self, rhs: Dimension) -> Dimension {
        let mut e = self.0;
        for (a, b) in e.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        Dimension(e)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            f.write_str("dimensionless")
        } else {
            f.write_str(&self.si_unit())
        }
    }
}

impl fmt::Debug for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dimension({self})")
    }
}

/// A finite magnitude in SI base units with its dimension.
#[derive(Clone, Copy, Debug)]
pub struct Quantity {
    magnitude: f64,
    dimension: Dimension,
}

impl Quantity {
    pub fn new(magnitude: f64, dimension: Dimension) -> Result<Quantity, UnitError> {
        if magnitude.is_finite() {
            Ok(Quantity {
                magnitude,
                dimension,
            })
        } else {
            Err(UnitError::NonFinite)
        }
    }

    pub fn dimensionless(magnitude: f64) -> Result<Quantity, UnitError> {
        Quantity::new(magnitude, Dimension::DIMENSIONLESS)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn approx_eq(&self, other: &Quantity, rel_tol: f64) -> bool {
        self.dimension == other.dimension && approx_eq(self.magnitude, other.magnitude, rel_tol)
    }

    /// Renders the magnitude in SI, e.g. `"65.016 m**3"`. Parses back exactly.
    pub fn render_si(&self) -> String {
        let unit = self.dimension.si_unit();
        if unit.is_empty() {
            format_number(self.magnitude)
        } else {
            format!("{} {}", format_number(self.magnitude), unit)
        }
    }

    /// Renders in a caller-chosen unit with display rounding to 12 significant
    /// digits, e.g. `"65016 L"`. Returns `None` when the unit does not match
    /// this quantity's dimension.
    pub fn render_in(&self, unit: &str, registry: &UnitRegistry) -> Option<String> {
        let def = registry.resolve(unit).ok()?;
        if def.dimension != self.dimension {
            return None;
        }
        let v = round_significant(self.magnitude / def.factor, 12);
        Some(format!("{} {}", format_number(v), unit.trim()))
    }
}

impl PartialEq for Quantity {
    fn eq(&self, other: &Quantity) -> bool {
        self.approx_eq(other, REL_TOL)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_si())
    }
}

pub fn approx_eq(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

/// Shortest text that parses back to the same `f64`; scientific notation for
/// very large or very small magnitudes.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum UnitMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Applies `op` to two quantities.
///
/// In lenient mode an add/sub across different dimensions keeps the left
/// operand's dimension and returns a warning instead of failing.
pub fn quantity_arith(
    op: ArithOp,
    a: Quantity,
    b: Quantity,
    mode: UnitMode,
) -> Result<(Quantity, Option<String>), UnitError> {
    let mut warning = None;
    let (value, dimension) = match op {
        ArithOp::Add | ArithOp::Sub => {
            if a.dimension != b.dimension {
                if mode == UnitMode::Strict {
                    return Err(UnitError::DimensionMismatch {
                        left: a.dimension,
                        right: b.dimension,
                    });
                }
                warning = Some(format!(
                    "{op:?} of mismatched dimensions {} and {}; kept {}",
                    a.dimension, b.dimension, a.dimension
                ));
            }
            let v = if op == ArithOp::Add {
                a.magnitude + b.magnitude
            } else {
                a.magnitude - b.magnitude
            };
            (v, a.dimension)
        }
        ArithOp::Mul => (a.magnitude * b.magnitude, a.dimension * b.dimension),
        ArithOp::Div => {
            if b.magnitude == 0.0 {
                return Err(UnitError::DivisionByZero);
            }
            (a.magnitude / b.magnitude, a.dimension / b.dimension)
        }
    };
    Ok((Quantity::new(value, dimension)?, warning))
}

/// Scale factor to SI and dimension of a unit expression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitDef {
    pub factor: f64,
    pub dimension: Dimension,
}

/// A unit expression as written: symbols with integer exponents, e.g.
/// `kg m**-3` is `[("kg", 1), ("m", -3)]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitExpr(pub Vec<(String, i32)>);

impl UnitExpr {
    pub fn parse(text: &str) -> Result<UnitExpr, UnitError> {
        let malformed = || UnitError::MalformedUnit(text.to_string());
        let chars: Vec<char> = text.chars().collect();
        let mut terms = Vec::new();
        let mut i = 0;
        let mut sign = 1;
        let mut expect_term = true;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '*' || c == '/' {
                if expect_term {
                    return Err(malformed());
                }
                sign = if c == '/' { -1 } else { 1 };
                expect_term = true;
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '*' | '/' | '^')
            {
                i += 1;
            }
            let symbol: String = chars[start..i].iter().collect();
            let mut exp = 1;
            let pow_len = if i + 1 < chars.len() && chars[i] == '*' && chars[i + 1] == '*' {
                2
            } else if i < chars.len() && chars[i] == '^' {
                1
            } else {
                0
            };
            if pow_len > 0 {
                i += pow_len;
                let estart = i;
                if i < chars.len() && matches!(chars[i], '-' | '+') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let etext: String = chars[estart..i].iter().collect();
                exp = etext.parse().map_err(|_| malformed())?;
            }
            terms.push((symbol, exp * sign));
            sign = 1;
            expect_term = false;
        }
        if terms.is_empty() || expect_term {
            return Err(malformed());
        }
        Ok(UnitExpr(terms))
    }
}

impl fmt::Display for UnitExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (sym, exp)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if *exp == 1 {
                f.write_str(sym)?;
            } else {
                write!(f, "{sym}**{exp}")?;
            }
        }
        Ok(())
    }
}

/// Maps unit symbols to SI factors and dimensions. Immutable once built.
#[derive(Clone, Debug)]
pub struct UnitRegistry {
    units: HashMap<String, UnitDef>,
}

impl UnitRegistry {
    pub fn empty() -> UnitRegistry {
        UnitRegistry {
            units: HashMap::new(),
        }
    }

    /// The built-in registry, shared process-wide.
    pub fn standard() -> &'static UnitRegistry {
        static STANDARD: OnceLock<UnitRegistry> = OnceLock::new();
        STANDARD.get_or_init(UnitRegistry::build_standard)
    }

    fn build_standard() -> UnitRegistry {
        let d = Dimension::DIMENSIONLESS;
        let len = Dimension::LENGTH;
        let mass = Dimension::MASS;
        let time = Dimension::TIME;
        let area = len.powi(2);
        let vol = len.powi(3);
        let speed = len / time;
        let force = mass * len / time.powi(2);
        let energy = force * len;
        let power = energy / time;
        let info = Dimension::INFORMATION;
        let ft = 0.3048;
        let mut r = UnitRegistry::empty();
        let table: &[(&str, f64, Dimension)] = &[
            // length
            ("m", 1.0, len),
            ("km", 1e3, len),
            ("cm", 1e-2, len),
            ("mm", 1e-3, len),
            ("um", 1e-6, len),
            ("nm", 1e-9, len),
            ("ft", ft, len),
            ("in", 0.0254, len),
            ("yd", 0.9144, len),
            ("mi", 1609.344, len),
            ("nmi", 1852.0, len),
            ("au", 149_597_870_700.0, len),
            ("ly", 9_460_730_472_580_800.0, len),
            // area
            ("ha", 1e4, area),
            ("acre", 4046.856_422_4, area),
            // volume
            ("L", 1e-3, vol),
            ("l", 1e-3, vol),
            ("mL", 1e-6, vol),
            ("ml", 1e-6, vol),
            ("gal", 0.003_785_411_784, vol),
            // mass
            ("kg", 1.0, mass),
            ("g", 1e-3, mass),
            ("mg", 1e-6, mass),
            ("t", 1e3, mass),
            ("tonne", 1e3, mass),
            ("lb", 0.453_592_37, mass),
            ("oz", 0.028_349_523_125, mass),
            // time
            ("s", 1.0, time),
            ("ms", 1e-3, time),
            ("min", 60.0, time),
            ("h", 3600.0, time),
            ("hr", 3600.0, time),
            ("day", 86_400.0, time),
            ("week", 604_800.0, time),
            ("year", 31_557_600.0, time),
            ("yr", 31_557_600.0, time),
            // speed
            ("mph", 0.447_04, speed),
            ("knot", 1852.0 / 3600.0, speed),
            // mechanics
            ("N", 1.0, force),
            ("Pa", 1.0, force / area),
            ("J", 1.0, energy),
            ("kJ", 1e3, energy),
            ("cal", 4.184, energy),
            ("kcal", 4184.0, energy),
            ("Wh", 3600.0, energy),
            ("kWh", 3.6e6, energy),
            ("W", 1.0, power),
            ("kW", 1e3, power),
            ("Hz", 1.0, time.powi(-1)),
            // remaining SI base units
            ("A", 1.0, Dimension::CURRENT),
            ("K", 1.0, Dimension::TEMPERATURE),
            ("mol", 1.0, Dimension::AMOUNT),
            ("cd", 1.0, Dimension::LUMINOUS_INTENSITY),
            // information
            ("B", 1.0, info),
            ("bit", 0.125, info),
            ("KB", 1e3, info),
            ("MB", 1e6, info),
            ("GB", 1e9, info),
            ("TB", 1e12, info),
            ("PB", 1e15, info),
            // currency
            ("USD", 1.0, Dimension::CURRENCY),
            // dimensionless
            ("%", 0.01, d),
        ];
        for &(sym, factor, dimension) in table {
            r.insert(sym, UnitDef { factor, dimension });
        }
        r
    }

    pub fn insert(&mut self, symbol: &str, def: UnitDef) {
        self.units.insert(symbol.to_string(), def);
    }

    pub fn get(&self, symbol: &str) -> Option<UnitDef> {
        self.units.get(symbol).copied()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.units.keys().map(String::as_str)
    }

    /// Adds units from extension text: one unit per line,
    /// `token factor e_len,e_mass,e_time,e_current,e_temp,e_amount,e_lum,e_info,e_currency`.
    /// `#` starts a comment.
    pub fn extend_from_str(&mut self, text: &str) -> Result<(), UnitError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| UnitError::RegistryFile {
                line: n + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `token factor dimension-vector`"));
            }
            let factor: f64 = fields[1].parse().map_err(|_| err("bad factor"))?;
            if !factor.is_finite() || factor <= 0.0 {
                return Err(err("factor must be positive and finite"));
            }
            let exps: Vec<i8> = fields[2]
                .split(',')
                .map(|e| e.trim().parse::<i8>())
                .collect::<Result<_, _>>()
                .map_err(|_| err("bad dimension vector"))?;
            let exps: [i8; N_DIMS] = exps
                .try_into()
                .map_err(|_| err("dimension vector needs 9 exponents"))?;
            if fields[0].contains(['*', '/', '^']) {
                return Err(err("unit token may not contain operators"));
            }
            self.insert(
                fields[0],
                UnitDef {
                    factor,
                    dimension: Dimension(exps),
                },
            );
        }
        Ok(())
    }

    /// Standard registry plus the units in an extension file.
    pub fn with_extension_file(path: &Path) -> Result<UnitRegistry, UnitError> {
        let text = std::fs::read_to_string(path).map_err(|e| UnitError::Io(e.to_string()))?;
        let mut r = UnitRegistry::standard().clone();
        r.extend_from_str(&text)?;
        Ok(r)
    }

    pub fn resolve_expr(&self, expr: &UnitExpr) -> Result<UnitDef, UnitError> {
        let mut factor = 1.0;
        let mut dimension = Dimension::DIMENSIONLESS;
        for (sym, exp) in &expr.0 {
            let def = self
                .get(sym)
                .ok_or_else(|| UnitError::UnknownUnit(sym.clone()))?;
            factor *= def.factor.powi(*exp);
            dimension = dimension * def.dimension.powi(*exp);
        }
        Ok(UnitDef { factor, dimension })
    }

    pub fn resolve(&self, text: &str) -> Result<UnitDef, UnitError> {
        self.resolve_expr(&UnitExpr::parse(text)?)
    }

    /// Parses `"<number> [unit-expr]"` into an SI-normalized quantity.
    pub fn parse_quantity(&self, text: &str) -> Result<Quantity, UnitError> {
        let (value, rest) = split_number(text)?;
        if rest.is_empty() {
            return Quantity::dimensionless(value);
        }
        let def = self.resolve(rest)?;
        Quantity::new(value * def.factor, def.dimension)
    }

    /// Like [`parse_quantity`](Self::parse_quantity), but an unknown or
    /// malformed unit falls back to a dimensionless value with a warning.
    pub fn parse_quantity_lenient(&self, text: &str) -> Result<(Quantity, Option<String>), UnitError> {
        match self.parse_quantity(text) {
            Ok(q) => Ok((q, None)),
            Err(e @ (UnitError::UnknownUnit(_) | UnitError::MalformedUnit(_))) => {
                let (value, _) = split_number(text)?;
                Ok((
                    Quantity::dimensionless(value)?,
                    Some(format!("{e}; treated {text:?} as dimensionless")),
                ))
            }
            Err(e) => Err(e),
        }
    }

    pub fn parse_quantity_with(
        &self,
        text: &str,
        mode: UnitMode,
    ) -> Result<(Quantity, Option<String>), UnitError> {
        match mode {
            UnitMode::Strict => self.parse_quantity(text).map(|q| (q, None)),
            UnitMode::Lenient => self.parse_quantity_lenient(text),
        }
    }
}

/// Parses a quantity with the standard registry.
pub fn parse_quantity(text: &str) -> Result<Quantity, UnitError> {
    UnitRegistry::standard().parse_quantity(text)
}

/// Splits a leading decimal or scientific literal from the remaining unit text.
pub fn split_number(text: &str) -> Result<(f64, &str), UnitError> {
    let t = text.trim();
    let b = t.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return Err(UnitError::UnparsableNumber(text.to_string()));
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    let value: f64 = t[..i]
        .parse()
        .map_err(|_| UnitError::UnparsableNumber(text.to_string()))?;
    if !value.is_finite() {
        return Err(UnitError::NonFinite);
    }
    Ok((value, t[i..].trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64, d: Dimension) -> Quantity {
        Quantity::new(v, d).unwrap()
    }

    #[test]
    fn bare_number_is_dimensionless() {
        assert_eq!(parse_quantity("7").unwrap(), q(7.0, Dimension::DIMENSIONLESS));
        assert_eq!(
            parse_quantity("6.9e+12").unwrap(),
            q(6.9e12, Dimension::DIMENSIONLESS)
        );
    }

    #[test]
    fn litres_normalize_to_cubic_metres() {
        let v = parse_quantity("18 L").unwrap();
        assert_eq!(v.dimension(), Dimension::LENGTH.powi(3));
        assert!(approx_eq(v.magnitude(), 0.018, 1e-12));
    }

    #[test]
    fn cubic_feet() {
        // 1 ft = 0.3048 m exactly, so 1 ft**3 = 0.028316846592 m**3.
        let v = parse_quantity("0.67 ft**3").unwrap();
        assert_eq!(v.dimension(), Dimension::LENGTH.powi(3));
        assert!(approx_eq(v.magnitude(), 0.67 * 0.028_316_846_592, 1e-12));
        assert!(approx_eq(v.magnitude(), 0.018_972_287, 1e-7));
    }

    #[test]
    fn compound_units() {
        let d = parse_quantity("1000 kg m**-3").unwrap();
        assert_eq!(d.dimension(), Dimension::MASS / Dimension::LENGTH.powi(3));
        let s = parse_quantity("36 km/h").unwrap();
        assert!(approx_eq(s.magnitude(), 10.0, 1e-12));
        assert_eq!(s.dimension(), Dimension::LENGTH / Dimension::TIME);
        let s2 = parse_quantity("36 km*h**-1").unwrap();
        assert_eq!(s, s2);
        let s3 = parse_quantity("36 km h^-1").unwrap();
        assert_eq!(s, s3);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_quantity("L"), Err(UnitError::UnparsableNumber(_))));
        assert!(matches!(parse_quantity(""), Err(UnitError::UnparsableNumber(_))));
        assert!(matches!(parse_quantity("5 furlongs"), Err(UnitError::UnknownUnit(_))));
        assert!(matches!(parse_quantity("5 m**"), Err(UnitError::MalformedUnit(_))));
        assert!(matches!(parse_quantity("5 / m"), Err(UnitError::MalformedUnit(_))));
    }

    #[test]
    fn lenient_fallback() {
        let (v, w) = UnitRegistry::standard()
            .parse_quantity_lenient("105 people")
            .unwrap();
        assert_eq!(v, q(105.0, Dimension::DIMENSIONLESS));
        assert!(w.is_some());
        // Malformed-but-known units such as "s**2" still parse.
        let (v, w) = UnitRegistry::standard()
            .parse_quantity_lenient("105 s**2")
            .unwrap();
        assert_eq!(v.dimension(), Dimension::TIME.powi(2));
        assert!(w.is_none());
    }

    #[test]
    fn arithmetic() {
        let seven = q(7.0, Dimension::DIMENSIONLESS);
        let l3 = q(0.018, Dimension::LENGTH.powi(3));
        let (p, _) = quantity_arith(ArithOp::Mul, seven, l3, UnitMode::Strict).unwrap();
        assert_eq!(p, q(0.126, Dimension::LENGTH.powi(3)));

        let one = q(1.0, Dimension::LENGTH.powi(3));
        let (r, _) = quantity_arith(ArithOp::Div, one, one, UnitMode::Strict).unwrap();
        assert_eq!(r, q(1.0, Dimension::DIMENSIONLESS));

        let m = q(2.0, Dimension::LENGTH);
        let kg = q(3.0, Dimension::MASS);
        assert!(matches!(
            quantity_arith(ArithOp::Add, m, kg, UnitMode::Strict),
            Err(UnitError::DimensionMismatch { .. })
        ));
        let (s, w) = quantity_arith(ArithOp::Add, m, kg, UnitMode::Lenient).unwrap();
        assert_eq!(s, q(5.0, Dimension::LENGTH));
        assert!(w.is_some());

        let zero = q(0.0, Dimension::DIMENSIONLESS);
        assert_eq!(
            quantity_arith(ArithOp::Div, m, zero, UnitMode::Lenient),
            Err(UnitError::DivisionByZero)
        );
    }

    #[test]
    fn overflow_is_rejected() {
        let big = q(1e300, Dimension::DIMENSIONLESS);
        assert_eq!(
            quantity_arith(ArithOp::Mul, big, big, UnitMode::Lenient),
            Err(UnitError::NonFinite)
        );
        assert!(Quantity::new(f64::NAN, Dimension::DIMENSIONLESS).is_err());
    }

    #[test]
    fn render_in_source_unit() {
        let v = q(65.016, Dimension::LENGTH.powi(3));
        let reg = UnitRegistry::standard();
        assert_eq!(v.render_in("L", reg).unwrap(), "65016 L");
        assert_eq!(v.render_si(), "65.016 m**3");
        assert!(v.render_in("kg", reg).is_none());
    }

    #[test]
    fn si_unit_rendering() {
        assert_eq!((Dimension::MASS / Dimension::LENGTH.powi(3)).si_unit(), "kg m**-3");
        assert_eq!(Dimension::DIMENSIONLESS.si_unit(), "");
        assert_eq!(format_number(1e20), "1e20");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(2.0), "2");
    }

    #[test]
    fn extension_file() {
        let mut r = UnitRegistry::standard().clone();
        r.extend_from_str("# custom\nfurlong 201.168 1,0,0,0,0,0,0,0,0\nEUR 1 0,0,0,0,0,0,0,0,1\n")
            .unwrap();
        let v = r.parse_quantity("2 furlong").unwrap();
        assert!(approx_eq(v.magnitude(), 402.336, 1e-12));
        assert!(matches!(
            r.extend_from_str("bad 1 1,0"),
            Err(UnitError::RegistryFile { line: 1, .. })
        ));
    }
}
