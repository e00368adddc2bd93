/// State of the closed-form bouncing ball at one instant.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BallState {
    pub y: f64,
    pub v: f64,
    /// Contact instants up to and including `t`.
    pub bounces: Vec<f64>,
}

const MAX_BOUNCES: usize = 1_000_000;

/// Ballistic flight under gravity `g` with the velocity reflected and
/// scaled by `restitution` at every floor contact.
///
/// With `restitution < 1` the contacts accumulate; once a flight would last
/// less than 1e-15 s the ball is considered at rest on the floor.
pub fn analytic_bouncing_ball(y0: f64, v0: f64, g: f64, restitution: f64, t: f64) -> BallState {
    let mut ts = 0.0;
    let (mut ys, mut vs) = (y0, v0);
    let mut bounces = Vec::new();
    loop {
        let tau = contact_after(ys, vs, g);
        if ts + tau > t {
            let dt = t - ts;
            return BallState {
                y: ys + vs * dt - 0.5 * g * dt * dt,
                v: vs - g * dt,
                bounces,
            };
        }
        ts += tau;
        bounces.push(ts);
        let impact = vs - g * tau;
        vs = -restitution * impact;
        ys = 0.0;
        if contact_after(ys, vs, g) < 1e-15 || bounces.len() >= MAX_BOUNCES {
            return BallState {
                y: 0.0,
                v: 0.0,
                bounces,
            };
        }
    }
}

/// Time until `y + v s - g s^2 / 2` reaches zero from height `y >= 0`.
pub fn contact_after(y: f64, v: f64, g: f64) -> f64 {
    // (v + sqrt(v^2 + 2 g y)) / g, rearranged to avoid cancellation for v < 0
    let disc = (v * v + 2.0 * g * y).sqrt();
    if v >= 0.0 {
        (v + disc) / g
    } else {
        2.0 * y / (disc - v)
    }
}
