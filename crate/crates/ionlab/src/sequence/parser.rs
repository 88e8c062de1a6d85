//! Parser and pretty-printer for the pulse-sequence language.
//!
//! The language is line-oriented with `#` comments. A program starts with a
//! `trap` line and an `ion` line, followed by statements:
//!
//! ```text
//! trap y=2.07MHz, z=4.51MHz
//! ion Ca40
//! init thermal doppler          # or: init ground | init thermal nbar=9.5
//! cool mode=z A-=50000 A+=49.95 t=2ms
//! pulse bsb(z) pi phase=0 omega=20kHz
//! pulse carrier t=scan(0us,200us,101) detune=5kHz
//! repump854 fidelity=0.9
//! wait 0.2ms
//! measure shots=400
//! ```
//!
//! Times take s/ms/us suffixes; frequencies take Hz/kHz/MHz (cycle
//! frequencies, multiplied by 2π on ingestion; the pretty-printer may emit
//! a raw angular `rads` suffix to keep round-trips exact); angles are plain
//! radians or the literals `pi`, `pi/2`. `scan(start,stop,points)` may
//! appear in exactly one place per program.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quantum::Axis;

use super::executor::{ModeKind, PartialConfig};
use super::{
    Pulse, PulseLength, PulseTarget, ScanSite, ScanSpec, Sequence, SequenceHeader, Step,
    ThermalInit,
};

/// Rabi frequency assumed when a pulse omits `omega=`: 2π·20 kHz.
pub const DEFAULT_RABI_HZ: f64 = 20e3;

const TWO_PI: f64 = 2.0 * PI;

// ---------------------------------------------------------------------------
// lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    Quantity(f64, String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex_line(text: &str, line_no: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '/')
            {
                i += 1;
            }
            let mut word: String = chars[start..i].iter().collect();
            // absorb the sign of the cooling-rate keys `A-` / `A+`
            if i + 1 < chars.len() && (chars[i] == '-' || chars[i] == '+') && chars[i + 1] == '=' {
                word.push(chars[i]);
                i += 1;
            }
            toks.push(Token {
                tok: Tok::Word(word),
                col,
            });
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || c == '.'
            || ((c == '-' || c == '+')
                && i + 1 < chars.len()
                && (chars[i + 1].is_ascii_digit() || chars[i + 1] == '.'));
        if starts_number {
            let start = i;
            if c == '-' || c == '+' {
                i += 1;
            }
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let raw: String = chars[start..i].iter().collect();
            let value: f64 = raw
                .parse()
                .map_err(|_| Error::parse(line_no, col, format!("bad number `{raw}`")))?;
            // adjacent letters form a unit suffix
            let ustart = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            if i > ustart {
                let unit: String = chars[ustart..i].iter().collect();
                toks.push(Token {
                    tok: Tok::Quantity(value, unit),
                    col,
                });
            } else {
                toks.push(Token {
                    tok: Tok::Number(value),
                    col,
                });
            }
            continue;
        }
        if matches!(c, '=' | ',' | '(' | ')') {
            toks.push(Token {
                tok: Tok::Sym(c),
                col,
            });
            i += 1;
            continue;
        }
        return Err(Error::parse(
            line_no,
            col,
            format!("unexpected character `{c}`"),
        ));
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// token cursor
// ---------------------------------------------------------------------------

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(toks: Vec<Token>, line: usize) -> Self {
        Cursor { toks, pos: 0, line }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|t| t.col)
            .unwrap_or_else(|| self.toks.last().map(|t| t.col + 1).unwrap_or(1))
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, self.col(), msg)
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        match self.next().map(|t| t.tok) {
            Some(Tok::Sym(s)) if s == c => Ok(()),
            _ => Err(Error::parse(
                self.line,
                self.col(),
                format!("expected `{c}`"),
            )),
        }
    }

    fn accept_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self) -> Result<String> {
        match self.next().map(|t| t.tok) {
            Some(Tok::Word(w)) => Ok(w),
            _ => Err(Error::parse(self.line, self.col(), "expected a word")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

// ---------------------------------------------------------------------------
// typed value parsing
// ---------------------------------------------------------------------------

/// A literal that may be a fixed value or a scan placeholder.
enum MaybeScan {
    Fixed(f64),
    Scan {
        start: f64,
        stop: f64,
        points: usize,
    },
}

#[derive(Clone, Copy, PartialEq)]
enum ValueKind {
    /// seconds; accepts s/ms/us
    Time,
    /// angular rad/s; accepts Hz/kHz/MHz (×2π) and raw `rads`
    FreqAngular,
    /// cycle Hz; accepts Hz/kHz/MHz
    FreqCycle,
    /// radians; plain number, `rad`, `pi`, `pi/2`
    Angle,
    /// plain number
    Plain,
}

fn convert(kind: ValueKind, value: f64, unit: &str, cur: &Cursor) -> Result<f64> {
    match kind {
        ValueKind::Time => match unit {
            "s" => Ok(value),
            "ms" => Ok(value * 1e-3),
            "us" => Ok(value * 1e-6),
            "" => Err(cur.err("time value needs a unit (s, ms, us)")),
            u => Err(cur.err(format!("unknown time unit `{u}`"))),
        },
        ValueKind::FreqAngular => match unit {
            "Hz" => Ok(value * TWO_PI),
            "kHz" => Ok(value * 1e3 * TWO_PI),
            "MHz" => Ok(value * 1e6 * TWO_PI),
            "rads" => Ok(value),
            "" => Err(cur.err("frequency value needs a unit (Hz, kHz, MHz)")),
            u => Err(cur.err(format!("unknown frequency unit `{u}`"))),
        },
        ValueKind::FreqCycle => match unit {
            "Hz" => Ok(value),
            "kHz" => Ok(value * 1e3),
            "MHz" => Ok(value * 1e6),
            "" => Err(cur.err("frequency value needs a unit (Hz, kHz, MHz)")),
            u => Err(cur.err(format!("unknown frequency unit `{u}`"))),
        },
        ValueKind::Angle => match unit {
            "" | "rad" => Ok(value),
            u => Err(cur.err(format!("unknown angle unit `{u}`"))),
        },
        ValueKind::Plain => {
            if unit.is_empty() {
                Ok(value)
            } else {
                Err(cur.err(format!("unexpected unit `{unit}`")))
            }
        }
    }
}

fn parse_value(cur: &mut Cursor, kind: ValueKind) -> Result<f64> {
    match cur.next().map(|t| t.tok) {
        Some(Tok::Number(v)) => convert(kind, v, "", cur),
        Some(Tok::Quantity(v, u)) => convert(kind, v, &u, cur),
        Some(Tok::Word(w)) if kind == ValueKind::Angle && w == "pi" => Ok(PI),
        Some(Tok::Word(w)) if kind == ValueKind::Angle && w == "pi/2" => Ok(PI / 2.0),
        _ => Err(Error::parse(cur.line, cur.col(), "expected a value")),
    }
}

/// Parse either a fixed value or `scan(start,stop,points)`. Scan bounds for
/// frequency sites are kept in cycle Hz.
fn parse_maybe_scan(cur: &mut Cursor, kind: ValueKind) -> Result<MaybeScan> {
    if matches!(cur.peek(), Some(Tok::Word(w)) if w == "scan") {
        cur.next();
        let bound_kind = match kind {
            ValueKind::FreqAngular => ValueKind::FreqCycle,
            k => k,
        };
        cur.expect_sym('(')?;
        let start = parse_value(cur, bound_kind)?;
        cur.expect_sym(',')?;
        let stop = parse_value(cur, bound_kind)?;
        cur.expect_sym(',')?;
        let points = match cur.next().map(|t| t.tok) {
            Some(Tok::Number(v)) if v >= 1.0 && v.fract() == 0.0 => v as usize,
            _ => return Err(cur.err("scan point count must be a positive integer")),
        };
        cur.expect_sym(')')?;
        Ok(MaybeScan::Scan {
            start,
            stop,
            points,
        })
    } else {
        Ok(MaybeScan::Fixed(parse_value(cur, kind)?))
    }
}

// ---------------------------------------------------------------------------
// statement parsing
// ---------------------------------------------------------------------------

struct ScanSlot {
    spec: Option<ScanSpec>,
}

impl ScanSlot {
    fn put(
        &mut self,
        cur: &Cursor,
        site: ScanSite,
        start: f64,
        stop: f64,
        points: usize,
    ) -> Result<()> {
        if self.spec.is_some() {
            return Err(cur.err("only one scan(...) is allowed per program"));
        }
        self.spec = Some(ScanSpec {
            site,
            start,
            stop,
            points,
        });
        Ok(())
    }
}

fn parse_axis(cur: &mut Cursor) -> Result<Axis> {
    let w = cur.expect_word()?;
    w.parse::<Axis>()
        .map_err(|_| cur.err(format!("expected axis x, y or z, got `{w}`")))
}

fn parse_trap_line(cur: &mut Cursor, header: &mut SequenceHeader) -> Result<()> {
    loop {
        let axis = parse_axis(cur)?;
        cur.expect_sym('=')?;
        let f = parse_value(cur, ValueKind::FreqCycle)?;
        if f <= 0.0 {
            return Err(cur.err("trap frequency must be positive"));
        }
        header.trap_hz[axis.index()] = Some(f);
        if !cur.accept_sym(',') {
            break;
        }
    }
    if !cur.at_end() {
        return Err(cur.err("unexpected trailing input on trap line"));
    }
    Ok(())
}

fn parse_pulse(cur: &mut Cursor, step_index: usize, scan: &mut ScanSlot) -> Result<Pulse> {
    let target_word = cur.expect_word()?;
    let target = match target_word.as_str() {
        "carrier" => PulseTarget::Carrier,
        "rsb" | "bsb" => {
            cur.expect_sym('(')?;
            let axis = parse_axis(cur)?;
            cur.expect_sym(')')?;
            if target_word == "rsb" {
                PulseTarget::RedSideband(axis)
            } else {
                PulseTarget::BlueSideband(axis)
            }
        }
        w => {
            return Err(cur.err(format!(
                "unknown pulse target `{w}` (expected carrier, rsb(axis) or bsb(axis))"
            )))
        }
    };

    // areaOrDur: `pi` | `pi/2` | <angle> | t=<time or scan>
    let length = match cur.peek() {
        Some(Tok::Word(w)) if w == "t" => {
            cur.next();
            cur.expect_sym('=')?;
            match parse_maybe_scan(cur, ValueKind::Time)? {
                MaybeScan::Fixed(t) => {
                    if t < 0.0 {
                        return Err(cur.err("pulse duration must be ≥ 0"));
                    }
                    PulseLength::Duration(t)
                }
                MaybeScan::Scan {
                    start,
                    stop,
                    points,
                } => {
                    scan.put(
                        cur,
                        ScanSite::PulseDuration(step_index),
                        start,
                        stop,
                        points,
                    )?;
                    PulseLength::Duration(start)
                }
            }
        }
        _ => PulseLength::Area(parse_value(cur, ValueKind::Angle)?),
    };

    let mut pulse = Pulse {
        target,
        extra_detuning: 0.0,
        length,
        phase: 0.0,
        rabi_frequency: DEFAULT_RABI_HZ * TWO_PI,
    };

    let mut seen_phase = false;
    let mut seen_omega = false;
    let mut seen_detune = false;
    while !cur.at_end() {
        let key = cur.expect_word()?;
        cur.expect_sym('=')?;
        match key.as_str() {
            "phase" => {
                if seen_phase {
                    return Err(cur.err("duplicate phase option"));
                }
                seen_phase = true;
                pulse.phase = parse_value(cur, ValueKind::Angle)?;
            }
            "omega" => {
                if seen_omega {
                    return Err(cur.err("duplicate omega option"));
                }
                seen_omega = true;
                match parse_maybe_scan(cur, ValueKind::FreqAngular)? {
                    MaybeScan::Fixed(w) => {
                        if w <= 0.0 {
                            return Err(cur.err("omega must be positive"));
                        }
                        pulse.rabi_frequency = w;
                    }
                    MaybeScan::Scan {
                        start,
                        stop,
                        points,
                    } => {
                        scan.put(cur, ScanSite::PulseRabi(step_index), start, stop, points)?;
                        pulse.rabi_frequency = (start * TWO_PI).max(f64::MIN_POSITIVE);
                    }
                }
            }
            "detune" => {
                if seen_detune {
                    return Err(cur.err("duplicate detune option"));
                }
                seen_detune = true;
                match parse_maybe_scan(cur, ValueKind::FreqAngular)? {
                    MaybeScan::Fixed(d) => pulse.extra_detuning = d,
                    MaybeScan::Scan {
                        start,
                        stop,
                        points,
                    } => {
                        // a detuning scan sweeps the laser, which every pulse
                        // shares; the executor adds the offset program-wide
                        scan.put(
                            cur,
                            ScanSite::PulseDetuning(step_index),
                            start,
                            stop,
                            points,
                        )?;
                        pulse.extra_detuning = 0.0;
                    }
                }
            }
            k => return Err(cur.err(format!("unknown pulse option `{k}`"))),
        }
    }
    Ok(pulse)
}

fn parse_cool(cur: &mut Cursor) -> Result<Step> {
    let mut axis = None;
    let mut a_minus = None;
    let mut a_plus = None;
    let mut duration = None;
    while !cur.at_end() {
        let key = cur.expect_word()?;
        cur.expect_sym('=')?;
        match key.as_str() {
            "mode" => axis = Some(parse_axis(cur)?),
            "A-" => a_minus = Some(parse_value(cur, ValueKind::Plain)?),
            "A+" => a_plus = Some(parse_value(cur, ValueKind::Plain)?),
            "t" => duration = Some(parse_value(cur, ValueKind::Time)?),
            k => return Err(cur.err(format!("unknown cool option `{k}`"))),
        }
    }
    let axis = axis.ok_or_else(|| cur.err("cool requires mode=axis"))?;
    let a_minus = a_minus.ok_or_else(|| cur.err("cool requires A-=rate"))?;
    let a_plus = a_plus.ok_or_else(|| cur.err("cool requires A+=rate"))?;
    let duration = duration.ok_or_else(|| cur.err("cool requires t=time"))?;
    if !(a_minus > a_plus && a_plus >= 0.0) {
        return Err(cur.err("cooling requires A- > A+ ≥ 0"));
    }
    Ok(Step::SidebandCool {
        axis,
        a_minus,
        a_plus,
        duration,
    })
}

/// Parse a sequence program.
pub fn parse_sequence(text: &str) -> Result<Sequence> {
    let mut header: Option<SequenceHeader> = None;
    let mut partial = SequenceHeader::default();
    let mut saw_trap = false;
    let mut steps: Vec<Step> = Vec::new();
    let mut scan = ScanSlot { spec: None };

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex_line(raw_line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(toks, line_no);
        let keyword = cur.expect_word()?;
        match keyword.as_str() {
            "trap" => {
                if saw_trap {
                    return Err(cur.err("duplicate trap line"));
                }
                parse_trap_line(&mut cur, &mut partial)?;
                saw_trap = true;
                continue;
            }
            "ion" => {
                if header.is_some() {
                    return Err(cur.err("duplicate ion line"));
                }
                if !saw_trap {
                    return Err(cur.err("ion line must follow the trap line"));
                }
                partial.species = cur.expect_word()?;
                header = Some(partial.clone());
                continue;
            }
            _ => {}
        }
        if header.is_none() {
            return Err(cur.err("program must start with `trap ...` and `ion ...` header lines"));
        }
        let step_index = steps.len();
        let step = match keyword.as_str() {
            "init" => {
                let kind = cur.expect_word()?;
                match kind.as_str() {
                    "ground" => Step::InitGround,
                    "thermal" => match cur.peek() {
                        Some(Tok::Word(w)) if w == "doppler" => {
                            cur.next();
                            Step::InitThermal(ThermalInit::Doppler)
                        }
                        Some(Tok::Word(w)) if w == "nbar" => {
                            cur.next();
                            cur.expect_sym('=')?;
                            let v = parse_value(&mut cur, ValueKind::Plain)?;
                            if v < 0.0 {
                                return Err(cur.err("nbar must be ≥ 0"));
                            }
                            Step::InitThermal(ThermalInit::Nbar(v))
                        }
                        _ => return Err(cur.err("init thermal requires nbar=<value> or doppler")),
                    },
                    k => return Err(cur.err(format!("unknown init kind `{k}`"))),
                }
            }
            "pump" => Step::OpticalPump,
            "cool" => parse_cool(&mut cur)?,
            "pulse" => Step::Pulse(parse_pulse(&mut cur, step_index, &mut scan)?),
            "repump854" => {
                let mut fidelity = 1.0;
                if !cur.at_end() {
                    let key = cur.expect_word()?;
                    if key != "fidelity" {
                        return Err(cur.err(format!("unknown repump854 option `{key}`")));
                    }
                    cur.expect_sym('=')?;
                    fidelity = parse_value(&mut cur, ValueKind::Plain)?;
                    if !(0.0..=1.0).contains(&fidelity) {
                        return Err(cur.err("fidelity must lie in [0,1]"));
                    }
                }
                Step::Repump { fidelity }
            }
            "wait" => match parse_maybe_scan(&mut cur, ValueKind::Time)? {
                MaybeScan::Fixed(t) => {
                    if t < 0.0 {
                        return Err(cur.err("wait time must be ≥ 0"));
                    }
                    Step::Wait(t)
                }
                MaybeScan::Scan {
                    start,
                    stop,
                    points,
                } => {
                    scan.put(&cur, ScanSite::Wait(step_index), start, stop, points)?;
                    Step::Wait(start)
                }
            },
            "measure" => {
                let key = cur.expect_word()?;
                if key != "shots" {
                    return Err(cur.err("measure requires shots=<count>"));
                }
                cur.expect_sym('=')?;
                let v = parse_value(&mut cur, ValueKind::Plain)?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(cur.err("shots must be a non-negative integer"));
                }
                Step::Measure { shots: v as u64 }
            }
            k => return Err(cur.err(format!("unknown keyword `{k}`"))),
        };
        if !cur.at_end() {
            return Err(cur.err("unexpected trailing input"));
        }
        steps.push(step);
    }

    let header = header
        .ok_or_else(|| Error::parse(1, 1, "missing init/measure: program is empty (no header)"))?;
    let seq = Sequence {
        header,
        steps,
        scan: scan.spec,
    };
    seq.validate()
        .map_err(|e| Error::parse(text.lines().count().max(1), 1, e.to_string()))?;
    Ok(seq)
}

// ---------------------------------------------------------------------------
// config files
// ---------------------------------------------------------------------------

/// Parse a config file: the program header syntax (`trap`, `ion`) promoted
/// to a standalone file, extended with optional `laser`, `noise`, `crystal`
/// and `option` lines. Lines may appear in any order; later ones win.
///
/// ```text
/// trap x=2.16MHz, y=2.07MHz, z=4.51MHz
/// ion Ca40
/// laser cx=0, cy=0.7071067811865476, cz=0.7071067811865476
/// noise dephasing=2000 d_decay=1 heating=5.26
/// crystal ions=2 mode=rocking
/// option smax=2 detection=1 tol=1e-9 resonant_only=0 rwa_cutoff=200kHz n_max=32
/// ```
pub fn parse_config(text: &str) -> Result<PartialConfig> {
    let mut cfg = PartialConfig::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex_line(raw_line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(toks, line_no);
        let keyword = cur.expect_word()?;
        match keyword.as_str() {
            "trap" => {
                let mut header = SequenceHeader::default();
                header.trap_hz = cfg.trap_hz;
                parse_trap_line(&mut cur, &mut header)?;
                cfg.trap_hz = header.trap_hz;
            }
            "ion" => {
                cfg.species = Some(cur.expect_word()?);
            }
            "laser" => {
                let mut dir = cfg.laser_direction.unwrap_or([0.0; 3]);
                loop {
                    let key = cur.expect_word()?;
                    cur.expect_sym('=')?;
                    let v = parse_value(&mut cur, ValueKind::Plain)?;
                    match key.as_str() {
                        "cx" => dir[0] = v,
                        "cy" => dir[1] = v,
                        "cz" => dir[2] = v,
                        k => return Err(cur.err(format!("unknown laser key `{k}`"))),
                    }
                    if !cur.accept_sym(',') {
                        break;
                    }
                }
                cfg.laser_direction = Some(dir);
            }
            "noise" => {
                while !cur.at_end() {
                    let key = cur.expect_word()?;
                    cur.expect_sym('=')?;
                    let v = parse_value(&mut cur, ValueKind::Plain)?;
                    match key.as_str() {
                        "dephasing" => cfg.dephasing_rate = Some(v),
                        "d_decay" => cfg.d_decay_rate = Some(v),
                        "heating" => cfg.heating_rate = Some(v),
                        k => return Err(cur.err(format!("unknown noise key `{k}`"))),
                    }
                }
            }
            "crystal" => {
                while !cur.at_end() {
                    let key = cur.expect_word()?;
                    cur.expect_sym('=')?;
                    match key.as_str() {
                        "ions" => {
                            let v = parse_value(&mut cur, ValueKind::Plain)?;
                            if v < 1.0 || v.fract() != 0.0 {
                                return Err(cur.err("ions must be a positive integer"));
                            }
                            cfg.n_ions = Some(v as usize);
                        }
                        "mode" => {
                            let w = cur.expect_word()?;
                            cfg.mode_kind = Some(match w.as_str() {
                                "com" => ModeKind::Com,
                                "rocking" => ModeKind::Rocking,
                                k => return Err(cur.err(format!("unknown mode kind `{k}`"))),
                            });
                        }
                        k => return Err(cur.err(format!("unknown crystal key `{k}`"))),
                    }
                }
            }
            "option" => {
                while !cur.at_end() {
                    let key = cur.expect_word()?;
                    cur.expect_sym('=')?;
                    match key.as_str() {
                        "smax" => {
                            let v = parse_value(&mut cur, ValueKind::Plain)?;
                            cfg.s_max = Some(v as usize);
                        }
                        "detection" => {
                            cfg.detection_efficiency =
                                Some(parse_value(&mut cur, ValueKind::Plain)?)
                        }
                        "tol" => cfg.tol = Some(parse_value(&mut cur, ValueKind::Plain)?),
                        "resonant_only" => {
                            cfg.resonant_only =
                                Some(parse_value(&mut cur, ValueKind::Plain)? != 0.0)
                        }
                        "rwa_cutoff" => {
                            cfg.rwa_cutoff = Some(parse_value(&mut cur, ValueKind::FreqAngular)?)
                        }
                        "n_max" => {
                            let v = parse_value(&mut cur, ValueKind::Plain)?;
                            cfg.n_max = Some(v as usize);
                        }
                        k => return Err(cur.err(format!("unknown option `{k}`"))),
                    }
                }
            }
            k => return Err(cur.err(format!("unknown config keyword `{k}`"))),
        }
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// pretty-printer
// ---------------------------------------------------------------------------

/// Angular rad/s → exact text: `{v}Hz` when the division by 2π inverts
/// exactly, a raw `{x}rads` literal otherwise.
fn freq_repr(x: f64) -> String {
    let hz = x / TWO_PI;
    if hz * TWO_PI == x {
        format!("{hz}Hz")
    } else {
        format!("{x}rads")
    }
}

fn angle_repr(x: f64) -> String {
    if x == PI {
        "pi".to_string()
    } else if x == PI / 2.0 {
        "pi/2".to_string()
    } else {
        format!("{x}")
    }
}

fn scan_repr(spec: &ScanSpec, unit: &str) -> String {
    format!(
        "scan({}{unit},{}{unit},{})",
        spec.start, spec.stop, spec.points
    )
}

/// Canonical text form of a sequence; `parse_sequence` inverts it exactly.
pub fn pretty_print(seq: &Sequence) -> String {
    let mut out = String::new();
    let declared: Vec<String> = Axis::ALL
        .iter()
        .filter_map(|&a| seq.header.trap_hz[a.index()].map(|f| format!("{}={}Hz", a.label(), f)))
        .collect();
    out.push_str(&format!("trap {}\n", declared.join(", ")));
    out.push_str(&format!("ion {}\n", seq.header.species));

    for (i, step) in seq.steps.iter().enumerate() {
        let scan_at = |site_matcher: &dyn Fn(&ScanSite) -> bool| -> Option<&ScanSpec> {
            seq.scan.as_ref().filter(|s| site_matcher(&s.site))
        };
        match step {
            Step::InitGround => out.push_str("init ground\n"),
            Step::InitThermal(ThermalInit::Doppler) => out.push_str("init thermal doppler\n"),
            Step::InitThermal(ThermalInit::Nbar(v)) => {
                out.push_str(&format!("init thermal nbar={v}\n"))
            }
            Step::OpticalPump => out.push_str("pump\n"),
            Step::SidebandCool {
                axis,
                a_minus,
                a_plus,
                duration,
            } => out.push_str(&format!(
                "cool mode={axis} A-={a_minus} A+={a_plus} t={duration}s\n"
            )),
            Step::Pulse(p) => {
                let target = match p.target {
                    PulseTarget::Carrier => "carrier".to_string(),
                    PulseTarget::RedSideband(a) => format!("rsb({a})"),
                    PulseTarget::BlueSideband(a) => format!("bsb({a})"),
                };
                let len = match p.length {
                    PulseLength::Area(a) => angle_repr(a),
                    PulseLength::Duration(t) => {
                        if let Some(s) = scan_at(&|s| *s == ScanSite::PulseDuration(i)) {
                            format!("t={}", scan_repr(s, "s"))
                        } else {
                            format!("t={t}s")
                        }
                    }
                };
                let omega = if let Some(s) = scan_at(&|s| *s == ScanSite::PulseRabi(i)) {
                    format!("omega={}", scan_repr(s, "Hz"))
                } else {
                    format!("omega={}", freq_repr(p.rabi_frequency))
                };
                let detune = if let Some(s) = scan_at(&|s| *s == ScanSite::PulseDetuning(i)) {
                    format!("detune={}", scan_repr(s, "Hz"))
                } else {
                    format!("detune={}", freq_repr(p.extra_detuning))
                };
                out.push_str(&format!(
                    "pulse {target} {len} phase={} {omega} {detune}\n",
                    p.phase
                ));
            }
            Step::Repump { fidelity } => out.push_str(&format!("repump854 fidelity={fidelity}\n")),
            Step::Wait(t) => {
                if let Some(s) = scan_at(&|s| *s == ScanSite::Wait(i)) {
                    out.push_str(&format!("wait {}\n", scan_repr(s, "s")));
                } else {
                    out.push_str(&format!("wait {t}s\n"));
                }
            }
            Step::Measure { shots } => out.push_str(&format!("measure shots={shots}\n")),
        }
    }
    out
}
