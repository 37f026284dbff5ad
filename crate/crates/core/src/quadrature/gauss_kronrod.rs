use super::{Estimate, QuadratureSpec};
use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Ten-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// How the absolute tolerance is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// `abs_tol` is an absolute bound on the error.
    Unit,
    /// `abs_tol` is relative to the integral of `|f|`, which makes it
    /// meaningful for integrands carrying large physical prefactors.
    AbsIntegral,
}

/// Where the occupation factor of an integrand switches off.
///
/// The integrand is assumed to decay like `exp(-(x - edge) / width)` beyond
/// `edge`. `endpoint_power` is the exponent `m` of the substitution
/// `x = lower + u^m` applied next to the lower limit; `m = 2` removes a
/// square-root cusp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiWindow {
    pub edge: f64,
    pub width: f64,
    pub endpoint_power: f64,
}

impl FermiWindow {
    /// Window of the occupation `1 / (exp(eta0 + eta1 * x) + 1)`.
    pub fn from_multipliers(eta0: f64, eta1: f64) -> Self {
        Self {
            edge: -eta0 / eta1,
            width: 1.0 / eta1,
            endpoint_power: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Linear,
    Power { origin: f64, exponent: f64 },
    Tail { origin: f64, scale: f64 },
}

impl Map {
    #[inline]
    fn apply(self, u: f64) -> (f64, f64) {
        match self {
            Map::Linear => (u, 1.0),
            Map::Power { origin, exponent } => {
                let um1 = u.powf(exponent - 1.0);
                (origin + um1 * u, exponent * um1)
            }
            Map::Tail { origin, scale } => {
                let s = 1.0 - u;
                (origin + scale * u / s, scale / (s * s))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    map: Map,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> Result<Piece> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |u: f64| -> Result<f64> {
        let (x, jac) = map.apply(u);
        let y = f(x) * jac;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain(format!("integrand is not finite at x = {x:e}")))
        }
    };

    let fc = eval(center)?;
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let scale = half.abs();
    let value = resk * half;
    let resabs = resabs * scale;
    let resasc = resasc * scale;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    error = error.max(f64::EPSILON * resabs);
    Ok(Piece {
        map,
        a,
        b,
        value,
        error,
        abs: resabs,
    })
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    initial: &[(Map, f64, f64)],
    spec: &QuadratureSpec,
    reference: Reference,
) -> Result<Estimate> {
    spec.validate()?;
    let mut pieces = Vec::with_capacity(initial.len() + spec.max_subdivisions);
    for &(map, a, b) in initial {
        if b > a {
            pieces.push(kronrod(f, map, a, b)?);
        }
    }
    let mut subdivisions = 0;
    loop {
        let value: f64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        let magnitude = match reference {
            Reference::Unit => 1.0,
            Reference::AbsIntegral => pieces.iter().map(|p| p.abs).sum(),
        };
        let tolerance = (spec.rel_tol * value.abs()).max(spec.abs_tol * magnitude);
        if error <= tolerance {
            return Ok(Estimate::new(value, error));
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                subdivisions,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one piece");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                subdivisions,
            });
        }
        pieces.push(kronrod(f, p.map, p.a, mid)?);
        pieces.push(kronrod(f, p.map, mid, p.b)?);
        subdivisions += 1;
    }
}

/// Adaptive Gauss-Kronrod integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(Estimate::ZERO);
    }
    if b < a {
        let r = adaptive(&f, &[(Map::Linear, b, a)], spec, Reference::Unit)?;
        return Ok(Estimate::new(-r.value, r.error));
    }
    adaptive(&f, &[(Map::Linear, a, b)], spec, Reference::Unit)
}

/// Integral of `f` over `[lower, inf)` for integrands with unit-scale
/// exponential decay and at most a square-root singularity at `lower`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let window = FermiWindow {
        edge: lower,
        width: 1.0,
        endpoint_power: 2.0,
    };
    integrate_fermi_window(f, lower, window, spec, Reference::Unit)
}

/// Integral of `f` over `[lower, inf)` with the initial partition placed
/// around the Fermi edge of `window`.
pub fn integrate_fermi_window<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    window: FermiWindow,
    spec: &QuadratureSpec,
    reference: Reference,
) -> Result<Estimate> {
    let FermiWindow {
        edge,
        width,
        endpoint_power,
    } = window;
    if !lower.is_finite() || !edge.is_finite() || !(width > 0.0) || !width.is_finite() {
        return Err(Error::Domain(format!(
            "invalid integration window: lower={lower:e}, edge={edge:e}, width={width:e}"
        )));
    }
    if !(endpoint_power >= 1.0) {
        return Err(Error::Domain(format!(
            "endpoint power must be >= 1, got {endpoint_power}"
        )));
    }
    const EDGE_SPAN: f64 = 12.0;
    let span = EDGE_SPAN * width;
    let mut breaks = vec![lower];
    if edge - span > lower {
        breaks.push(edge - span);
    }
    if edge > lower {
        breaks.push(edge);
    }
    let anchor = edge.max(lower);
    breaks.push(anchor + span);
    let cut = anchor + spec.truncation_margin.max(EDGE_SPAN) * width;
    if cut > anchor + span {
        breaks.push(cut);
    }
    let cut = *breaks.last().unwrap();

    let mut initial = Vec::with_capacity(breaks.len() + 1);
    let head = Map::Power {
        origin: lower,
        exponent: endpoint_power,
    };
    initial.push((head, 0.0, (breaks[1] - lower).powf(1.0 / endpoint_power)));
    for w in breaks[1..].windows(2) {
        initial.push((Map::Linear, w[0], w[1]));
    }
    initial.push((
        Map::Tail {
            origin: cut,
            scale: width,
        },
        0.0,
        1.0,
    ));
    adaptive(&f, &initial, spec, reference)
}
