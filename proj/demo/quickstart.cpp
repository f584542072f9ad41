// Small tour: simulate a 3x3 torus, compare the time-averaged density with
// the exact stationary law, then run one coupled window/torus experiment.
#include <cstdio>
#include <memory>

#include "ffp/ffp.hpp"

int main() {
    using namespace ffp;
    const double lambda = 1.0;
    auto torus = std::make_shared<const Topology>(Topology::box(2, 1, Mode::torus));

    Engine engine(torus, {lambda}, Rng(2024));
    const auto m = estimate_marginal(engine, SiteSet{torus->origin()}, 100.0, 20000.0);
    const auto mc = m.estimate(1);
    const auto exact = exact_stationary(*torus, lambda);
    std::printf("origin density: simulated %.4f +- %.4f, exact %.6f (residual %.1e)\n", mc.value, mc.se,
                exact.site_density(torus->origin()), exact.residual);
    std::printf("events simulated: %llu\n", static_cast<unsigned long long>(engine.counts().total()));

    const double eps = epsilon_for(1, torus->degree_bound());
    std::printf("epsilon for m=1, degree bound %d: %.7f\n", torus->degree_bound(), eps);

    CoupleParams p;
    p.lambda = lambda;
    p.t = 0.5 * eps;
    p.replicas = 1000;
    CoupledSystem sys(p);
    const auto rep = summarize_lemma1(sys, sys.run_all(CylinderEvent::site_occupied(sys.outer().origin())));
    std::printf("coupled K=%d k=%d L=%d: lhs %.4f, blur term %.4f, TV term %.4f, pooled SE %.4f -> %s\n", p.K, p.k,
                p.L, rep.lhs, rep.blur_term, rep.tv_term, rep.pooled_se, to_string(rep.verdict));
    std::printf("domination violations: %zu\n", rep.domination_violations);
    return 0;
}
