//! Follows one box moving right at 3 px/frame with noisy detections and
//! prints the filter's velocity estimate.
use mot_sort::kalman::{bbox_to_z, predict, update, KalmanModel, KalmanState, INITIAL_COVARIANCE};
use mot_sort::BBox;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = KalmanModel::constant_velocity();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let det = |t: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let x = 100.0 + 3.0 * t + rng.gen_range(-1.0..1.0);
        BBox::new(x, 200.0, x + 40.0, 280.0, 1.0)
    };
    let mut st = KalmanState::from_observation(&bbox_to_z(&det(0.0, &mut rng))?, &INITIAL_COVARIANCE);
    for t in 1..=30 {
        st = predict(&st, &model);
        st = update(&st, &model, &bbox_to_z(&det(t as f64, &mut rng))?)?;
        if t % 10 == 0 {
            let b = st.bbox()?;
            println!("frame {t:2}: x1 {:7.2}  vx {:5.2}  var(vx) {:.3}", b.x1, st.x[4], st.p[(4, 4)]);
        }
    }
    Ok(())
}
