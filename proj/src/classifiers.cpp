#include "devfp/classifiers.hpp"

#include "devfp/error.hpp"
#include "tree_grower.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

namespace devfp::classifiers {

std::string_view to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::j48: return "j48";
    case ModelKind::random_tree: return "rt";
    case ModelKind::random_forest: return "rf";
    case ModelKind::naive_bayes: return "nb";
    case ModelKind::bagging: return "bagging";
    case ModelKind::vote: return "vote";
    }
    return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view text)
{
    for (auto kind : {ModelKind::j48, ModelKind::random_tree, ModelKind::random_forest,
                      ModelKind::naive_bayes, ModelKind::bagging, ModelKind::vote})
        if (to_string(kind) == text)
            return kind;
    return std::nullopt;
}

void Hyperparams::validate() const
{
    const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidHyperparams, what); };
    if (forest_trees < 1)
        fail("forest_trees must be >= 1");
    if (rt_feature_count && *rt_feature_count < 1)
        fail("rt_feature_count must be >= 1");
    if (bagging_rounds < 1)
        fail("bagging_rounds must be >= 1");
    if (!(bag_fraction > 0 && bag_fraction <= 1))
        fail("bag_fraction must be in (0, 1]");
    if (c45_min_leaf < 1)
        fail("c45_min_leaf must be >= 1");
    if (!(c45_confidence > 0 && c45_confidence <= 0.5))
        fail("c45_confidence must be in (0, 0.5]");
    if (!(nb_variance_floor > 0))
        fail("nb_variance_floor must be > 0");
    if (vote_members.empty())
        fail("vote needs at least one member");
    if (std::find(vote_members.begin(), vote_members.end(), ModelKind::vote) != vote_members.end())
        fail("vote members cannot themselves be vote");
}

std::size_t Hyperparams::feature_sample_size(std::size_t attribute_count) const
{
    if (attribute_count == 0)
        return 0;
    const std::size_t wanted =
        rt_feature_count ? *rt_feature_count
                         : static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(attribute_count)))) + 1;
    return std::min(wanted, attribute_count);
}

std::size_t argmax(std::span<const double> distribution)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < distribution.size(); ++i)
        if (distribution[i] > distribution[best])
            best = i;
    return best;
}

bool VoteModel::operator==(const VoteModel& other) const
{
    return members == other.members;
}

TrainedModel::TrainedModel(ModelKind kind, std::vector<std::string> schema,
                           std::vector<std::string> class_names, Hyperparams hyperparams, Body body)
    : kind_(kind), schema_(std::move(schema)), class_names_(std::move(class_names)),
      hyperparams_(std::move(hyperparams)), body_(std::move(body))
{
}

void TrainedModel::check_schema(std::span<const std::string> attributes) const
{
    if (!std::equal(attributes.begin(), attributes.end(), schema_.begin(), schema_.end())) {
        std::string expected;
        for (const auto& a : schema_)
            expected += (expected.empty() ? "" : ",") + a;
        throw Error(ErrorCode::SchemaMismatch, "model expects attributes [" + expected + "]");
    }
}

namespace {

constexpr double kMinPresentRate = 1e-6;
constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

ClassDistribution average(const std::vector<ClassDistribution>& parts, std::size_t k)
{
    ClassDistribution sum(k, 0.0);
    for (const auto& p : parts)
        for (std::size_t c = 0; c < k; ++c)
            sum[c] += p[c];
    for (double& v : sum)
        v /= static_cast<double>(parts.size());
    return sum;
}

ClassDistribution naive_bayes_distribution(const NaiveBayesModel& nb, std::span<const Cell> row)
{
    const std::size_t k = nb.priors.size();
    std::vector<double> log_post(k);
    for (std::size_t c = 0; c < k; ++c) {
        double lp = nb.priors[c] > 0 ? std::log(nb.priors[c]) : -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < row.size() && std::isfinite(lp); ++a) {
            if (!row[a] || !nb.attribute_seen[a])
                continue;
            const GaussianEstimate& g = nb.stats[c][a];
            const double z = (*row[a] - g.mean) / g.stddev;
            lp += std::log(std::max(g.present_rate, kMinPresentRate)) - kLogSqrtTwoPi -
                  std::log(g.stddev) - 0.5 * z * z;
        }
        log_post[c] = lp;
    }
    const double top = *std::max_element(log_post.begin(), log_post.end());
    ClassDistribution dist(k, 0.0);
    if (!std::isfinite(top)) {
        // Every class ruled out (only possible with all-zero priors): fall back to uniform.
        std::fill(dist.begin(), dist.end(), 1.0 / static_cast<double>(k));
        return dist;
    }
    double total = 0;
    for (std::size_t c = 0; c < k; ++c) {
        dist[c] = std::exp(log_post[c] - top);
        total += dist[c];
    }
    for (double& v : dist)
        v /= total;
    return dist;
}

} // namespace

ClassDistribution TrainedModel::distribution_unchecked(std::span<const Cell> row) const
{
    const std::size_t k = class_names_.size();
    return std::visit(
        [&](const auto& body) -> ClassDistribution {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, DecisionTree>) {
                return body.distribution(row);
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                std::vector<ClassDistribution> parts;
                for (const auto& t : body.trees)
                    parts.push_back(t.distribution(row));
                return average(parts, k);
            } else if constexpr (std::is_same_v<T, BaggingModel>) {
                std::vector<ClassDistribution> parts;
                for (const auto& t : body.members)
                    parts.push_back(t.distribution(row));
                return average(parts, k);
            } else if constexpr (std::is_same_v<T, NaiveBayesModel>) {
                return naive_bayes_distribution(body, row);
            } else {
                std::vector<ClassDistribution> parts;
                for (const auto& m : body.members)
                    parts.push_back(m.distribution_unchecked(row));
                return average(parts, k);
            }
        },
        body_);
}

ClassDistribution TrainedModel::predict_proba(std::span<const Cell> row) const
{
    if (row.size() != schema_.size())
        throw Error(ErrorCode::SchemaMismatch, "vector has " + std::to_string(row.size()) +
                                                   " values, model expects " + std::to_string(schema_.size()));
    return distribution_unchecked(row);
}

std::size_t TrainedModel::predict(std::span<const Cell> row) const
{
    const auto dist = predict_proba(row);
    return argmax(dist);
}

const std::string& TrainedModel::predict_name(std::span<const Cell> row) const
{
    return class_names_[predict(row)];
}

// ---------------------------------------------------------------------------

namespace {

void check_trainable(const Dataset& dataset)
{
    if (dataset.size() < 2)
        throw Error(ErrorCode::EmptyDataset, "training needs at least two rows, got " + std::to_string(dataset.size()));
    for (std::size_t r = 0; r < dataset.size(); ++r)
        if (!dataset.label(r))
            throw Error(ErrorCode::UnlabeledRow, "training row " + std::to_string(r) + " has no class");
    if (dataset.distinct_labels() < 2)
        throw Error(ErrorCode::SingleClassDataset, "training needs at least two classes");
}

std::vector<std::size_t> all_rows(const Dataset& dataset)
{
    std::vector<std::size_t> rows(dataset.size());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t m, bool bootstrap, Rng& rng)
{
    std::vector<std::size_t> rows(m);
    if (bootstrap) {
        for (auto& r : rows)
            r = rng.uniform(n);
    } else {
        std::iota(rows.begin(), rows.end(), 0);
    }
    return rows;
}

DecisionTree grow_c45_tree(const Dataset& dataset, const Hyperparams& hp, std::vector<std::size_t> rows)
{
    detail::TreeGrower grower(dataset, {hp.c45_min_leaf, std::nullopt, nullptr});
    DecisionTree tree = grower.grow(std::move(rows));
    return hp.c45_prune ? detail::prune(tree, hp.c45_confidence) : tree;
}

DecisionTree grow_random_tree(const Dataset& dataset, const Hyperparams& hp,
                              std::vector<std::size_t> rows, Rng& rng)
{
    detail::TreeGrower grower(dataset,
                              {hp.c45_min_leaf, hp.feature_sample_size(dataset.attribute_count()), &rng});
    return grower.grow(std::move(rows));
}

// Runs fn(0..count-1) on up to `threads` threads. Members write only their own slot,
// and the first exception (by member index) is rethrown.
template <class Fn>
void for_each_member(std::size_t count, unsigned threads, Fn fn)
{
    const auto workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < workers; ++t)
            pool.emplace_back(worker);
        worker();
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

TrainedModel make_model(ModelKind kind, const Dataset& dataset, const Hyperparams& hp, TrainedModel::Body body)
{
    return TrainedModel(kind, dataset.attributes(), dataset.class_names(), hp, std::move(body));
}

} // namespace

TrainedModel train_c45(const Dataset& dataset, const Hyperparams& hp)
{
    hp.validate();
    check_trainable(dataset);
    return make_model(ModelKind::j48, dataset, hp, grow_c45_tree(dataset, hp, all_rows(dataset)));
}

TrainedModel train_random_tree(const Dataset& dataset, const Hyperparams& hp, Rng& rng)
{
    hp.validate();
    check_trainable(dataset);
    return make_model(ModelKind::random_tree, dataset, hp, grow_random_tree(dataset, hp, all_rows(dataset), rng));
}

TrainedModel train_random_tree(const Dataset& dataset, const Hyperparams& hp)
{
    Rng rng(hp.seed);
    return train_random_tree(dataset, hp, rng);
}

TrainedModel train_random_forest(const Dataset& dataset, const Hyperparams& hp, unsigned threads)
{
    hp.validate();
    check_trainable(dataset);
    ForestModel forest;
    forest.trees.resize(hp.forest_trees);
    for_each_member(hp.forest_trees, threads, [&](std::size_t i) {
        Rng rng(derive_seed(hp.seed, i));
        auto rows = sample_rows(dataset.size(), dataset.size(), hp.bootstrap, rng);
        forest.trees[i] = grow_random_tree(dataset, hp, std::move(rows), rng);
    });
    return make_model(ModelKind::random_forest, dataset, hp, std::move(forest));
}

TrainedModel train_naive_bayes(const Dataset& dataset, const Hyperparams& hp)
{
    hp.validate();
    check_trainable(dataset);
    const std::size_t k = dataset.class_count();
    const std::size_t d = dataset.attribute_count();
    const double min_stddev = std::sqrt(hp.nb_variance_floor);

    // Welford; population (maximum-likelihood) variance.
    struct Moments {
        double n = 0, mu = 0, m2 = 0;
        void add(double x)
        {
            n += 1;
            const double delta = x - mu;
            mu += delta / n;
            m2 += delta * (x - mu);
        }
        double mean() const { return mu; }
        double stddev() const { return std::sqrt(std::max(0.0, m2 / n)); }
    };
    std::vector<std::vector<Moments>> per_class(k, std::vector<Moments>(d));
    std::vector<Moments> pooled(d);
    const auto class_rows = dataset.class_counts();
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const std::size_t c = *dataset.label(r);
        for (std::size_t a = 0; a < d; ++a) {
            if (const Cell& v = dataset.at(r, a)) {
                per_class[c][a].add(*v);
                pooled[a].add(*v);
            }
        }
    }

    NaiveBayesModel nb;
    const double n = static_cast<double>(dataset.size());
    for (std::size_t c = 0; c < k; ++c)
        nb.priors.push_back(static_cast<double>(class_rows[c]) / n);
    nb.attribute_seen.resize(d);
    for (std::size_t a = 0; a < d; ++a)
        nb.attribute_seen[a] = pooled[a].n > 0;
    nb.stats.assign(k, std::vector<GaussianEstimate>(d));
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t a = 0; a < d; ++a) {
            GaussianEstimate& g = nb.stats[c][a];
            const Moments& m = per_class[c][a].n > 0 ? per_class[c][a] : pooled[a];
            g.observed = per_class[c][a].n > 0;
            if (m.n > 0) {
                g.mean = m.mean();
                g.stddev = std::max(m.stddev(), min_stddev);
            } else {
                g.mean = 0;
                g.stddev = 1;
            }
            g.present_rate = class_rows[c] > 0 ? per_class[c][a].n / static_cast<double>(class_rows[c]) : 0.0;
        }
    }
    return make_model(ModelKind::naive_bayes, dataset, hp, std::move(nb));
}

TrainedModel train_bagging(const Dataset& dataset, const Hyperparams& hp, unsigned threads)
{
    hp.validate();
    check_trainable(dataset);
    const std::size_t n = dataset.size();
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hp.bag_fraction * static_cast<double>(n))));
    BaggingModel bag;
    bag.members.resize(hp.bagging_rounds);
    for_each_member(hp.bagging_rounds, threads, [&](std::size_t i) {
        Rng rng(derive_seed(hp.seed, i));
        bag.members[i] = grow_c45_tree(dataset, hp, sample_rows(n, m, hp.bootstrap, rng));
    });
    return make_model(ModelKind::bagging, dataset, hp, std::move(bag));
}

TrainedModel train_vote(std::span<const ModelKind> members, const Dataset& dataset, const Hyperparams& hp,
                        unsigned threads)
{
    Hyperparams own = hp;
    own.vote_members.assign(members.begin(), members.end());
    own.validate();
    VoteModel vote;
    for (ModelKind kind : members) {
        try {
            vote.members.push_back(train(kind, dataset, hp, threads));
        } catch (const Error& e) {
            throw Error(e.code(), "vote member " + std::string(to_string(kind)) + ": " + e.what());
        }
    }
    return make_model(ModelKind::vote, dataset, own, std::move(vote));
}

TrainedModel train(ModelKind kind, const Dataset& dataset, const Hyperparams& hp, unsigned threads)
{
    switch (kind) {
    case ModelKind::j48: return train_c45(dataset, hp);
    case ModelKind::random_tree: return train_random_tree(dataset, hp);
    case ModelKind::random_forest: return train_random_forest(dataset, hp, threads);
    case ModelKind::naive_bayes: return train_naive_bayes(dataset, hp);
    case ModelKind::bagging: return train_bagging(dataset, hp, threads);
    case ModelKind::vote: return train_vote(hp.vote_members, dataset, hp, threads);
    }
    throw Error(ErrorCode::InvalidHyperparams, "unknown model kind");
}

} // namespace devfp::classifiers
