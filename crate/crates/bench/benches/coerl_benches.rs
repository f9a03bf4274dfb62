use coerl::es::partial_gradient_update;
use coerl::sac::rl_phase;
use coerl::tensor::Tensor2;
use coerl::{Activation, CriticPair, GaussianPolicy, LearnerState, MlpParams, MlpSpec, PolicySpec, ReplayBuffer, SacConfig};
use coerl_bench::{random_transitions, update_fixture};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn partial_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("partial_gradient_update");
    for dim in [1_000usize, 10_000, 100_000] {
        let (theta, group, population, fitnesses) = update_fixture(dim, 6);
        g.throughput(Throughput::Elements(dim as u64));
        g.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            let mut t = theta.clone();
            b.iter(|| partial_gradient_update(&mut t, &group, &population, black_box(&fitnesses), 1e-9, 1.0).unwrap())
        });
    }
    g.finish();
}

fn mlp(c: &mut Criterion) {
    let spec = MlpSpec::new(17, vec![64, 64], 12, Activation::Relu).unwrap();
    let net = MlpParams::init(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let x = Tensor2::from_vec(256, 17, vec![0.1; 256 * 17]).unwrap();
    let upstream = Tensor2::from_vec(256, 12, vec![1.0; 256 * 12]).unwrap();
    c.bench_function("mlp_forward_batch_256", |b| b.iter(|| net.forward_batch(black_box(&x)).unwrap()));
    c.bench_function("mlp_forward_backward_batch_256", |b| {
        b.iter(|| {
            let (_, cache) = net.forward_batch(black_box(&x)).unwrap();
            net.backward_batch(&cache, &upstream).unwrap()
        })
    });
}

fn rl_step(c: &mut Criterion) {
    let spec = PolicySpec { state_dim: 3, action_dim: 1, hidden_dims: vec![64, 64], activation: Activation::Relu };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let policy = GaussianPolicy::init(&spec, &mut rng).unwrap();
    let critics = CriticPair::init(&spec, &mut rng).unwrap();
    let mut learner = LearnerState::new(policy, critics, &SacConfig::default()).unwrap();
    let mut buffer = ReplayBuffer::new(10_000).unwrap();
    buffer.extend(random_transitions(4096, 3, 1, 2));
    c.bench_function("sac_update_batch_256", |b| {
        b.iter(|| rl_phase(&mut learner, &buffer, 1, 256, &mut rng).unwrap())
    });
}

criterion_group!(benches, partial_update, mlp, rl_step);
criterion_main!(benches);
