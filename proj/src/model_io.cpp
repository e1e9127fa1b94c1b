#include "devfp/classifiers.hpp"
#include "devfp/error.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace devfp::classifiers {

namespace {

std::string real(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_counts(std::ostream& out, const std::vector<double>& counts)
{
    for (double c : counts)
        out << ' ' << real(c);
}

void write_tree(std::ostream& out, const DecisionTree& tree)
{
    out << "tree " << tree.nodes().size() << '\n';
    for (const TreeNode& node : tree.nodes()) {
        if (const auto& s = node.split)
            out << "split " << s->attribute << ' ' << real(s->threshold) << ' ' << (s->absent_left ? 'L' : 'R')
                << ' ' << s->left << ' ' << s->right;
        else
            out << "leaf";
        write_counts(out, node.class_counts);
        out << '\n';
    }
}

void write_hyperparams(std::ostream& out, const Hyperparams& hp)
{
    out << "hyperparams seed=" << hp.seed << " forest_trees=" << hp.forest_trees << " rt_feature_count="
        << (hp.rt_feature_count ? std::to_string(*hp.rt_feature_count) : std::string("auto"))
        << " bagging_rounds=" << hp.bagging_rounds << " bag_fraction=" << real(hp.bag_fraction)
        << " c45_min_leaf=" << hp.c45_min_leaf << " c45_confidence=" << real(hp.c45_confidence)
        << " c45_prune=" << (hp.c45_prune ? 1 : 0) << " nb_variance_floor=" << real(hp.nb_variance_floor)
        << " bootstrap=" << (hp.bootstrap ? 1 : 0) << " vote_members=";
    for (std::size_t i = 0; i < hp.vote_members.size(); ++i)
        out << (i ? "," : "") << to_string(hp.vote_members[i]);
    out << '\n';
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::string line()
    {
        std::string text;
        if (!std::getline(in_, text))
            fail("unexpected end of model file");
        ++line_no_;
        if (!text.empty() && text.back() == '\r')
            text.pop_back();
        return text;
    }

    std::vector<std::string> tokens()
    {
        std::istringstream ss(line());
        std::vector<std::string> out;
        std::string tok;
        while (ss >> tok)
            out.push_back(tok);
        return out;
    }

    /// Reads "<keyword> <count>" and returns the count.
    std::size_t header(const std::string& keyword)
    {
        const auto t = tokens();
        if (t.size() != 2 || t[0] != keyword)
            fail("expected '" + keyword + " <n>'");
        return to_size(t[1]);
    }

    void expect(const std::string& keyword)
    {
        const auto t = tokens();
        if (t.size() != 1 || t[0] != keyword)
            fail("expected '" + keyword + "'");
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw Error(ErrorCode::ModelFormat, "line " + std::to_string(line_no_) + ": " + what);
    }

    std::size_t to_size(const std::string& s) const
    {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            fail("bad integer '" + s + "'");
        return v;
    }

    double to_real(const std::string& s) const
    {
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            fail("bad number '" + s + "'");
        return v;
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

Hyperparams read_hyperparams(LineReader& r)
{
    const auto t = r.tokens();
    if (t.empty() || t[0] != "hyperparams")
        r.fail("expected hyperparams line");
    Hyperparams hp;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const auto eq = t[i].find('=');
        if (eq == std::string::npos)
            r.fail("bad hyperparameter '" + t[i] + "'");
        const std::string key = t[i].substr(0, eq), value = t[i].substr(eq + 1);
        if (key == "seed")
            hp.seed = r.to_size(value);
        else if (key == "forest_trees")
            hp.forest_trees = r.to_size(value);
        else if (key == "rt_feature_count")
            hp.rt_feature_count = value == "auto" ? std::nullopt : std::optional<std::size_t>(r.to_size(value));
        else if (key == "bagging_rounds")
            hp.bagging_rounds = r.to_size(value);
        else if (key == "bag_fraction")
            hp.bag_fraction = r.to_real(value);
        else if (key == "c45_min_leaf")
            hp.c45_min_leaf = r.to_size(value);
        else if (key == "c45_confidence")
            hp.c45_confidence = r.to_real(value);
        else if (key == "c45_prune")
            hp.c45_prune = value == "1";
        else if (key == "nb_variance_floor")
            hp.nb_variance_floor = r.to_real(value);
        else if (key == "bootstrap")
            hp.bootstrap = value == "1";
        else if (key == "vote_members") {
            hp.vote_members.clear();
            std::istringstream ss(value);
            std::string name;
            while (std::getline(ss, name, ',')) {
                const auto kind = parse_model_kind(name);
                if (!kind)
                    r.fail("unknown vote member '" + name + "'");
                hp.vote_members.push_back(*kind);
            }
        } else
            r.fail("unknown hyperparameter '" + key + "'");
    }
    return hp;
}

std::vector<double> read_counts(LineReader& r, const std::vector<std::string>& t, std::size_t from, std::size_t k)
{
    if (t.size() != from + k)
        r.fail("expected " + std::to_string(k) + " class counts");
    std::vector<double> counts;
    for (std::size_t i = from; i < t.size(); ++i)
        counts.push_back(r.to_real(t[i]));
    return counts;
}

DecisionTree read_tree(LineReader& r, std::size_t k, std::size_t width)
{
    const std::size_t n = r.header("tree");
    if (n == 0)
        r.fail("empty tree");
    std::vector<TreeNode> nodes;
    for (std::size_t i = 0; i < n; ++i) {
        const auto t = r.tokens();
        if (t.empty())
            r.fail("empty tree node line");
        TreeNode node;
        if (t[0] == "leaf") {
            node.class_counts = read_counts(r, t, 1, k);
        } else if (t[0] == "split" && t.size() >= 6) {
            TreeSplit s;
            s.attribute = r.to_size(t[1]);
            s.threshold = r.to_real(t[2]);
            if (t[3] != "L" && t[3] != "R")
                r.fail("absent branch must be L or R");
            s.absent_left = t[3] == "L";
            s.left = static_cast<std::uint32_t>(r.to_size(t[4]));
            s.right = static_cast<std::uint32_t>(r.to_size(t[5]));
            if (s.attribute >= width || s.left >= n || s.right >= n || s.left <= i || s.right <= i)
                r.fail("split references out of range");
            node.split = s;
            node.class_counts = read_counts(r, t, 6, k);
        } else {
            r.fail("bad tree node");
        }
        nodes.push_back(std::move(node));
    }
    return DecisionTree(std::move(nodes));
}

TrainedModel read_model(LineReader& r)
{
    {
        const auto t = r.tokens();
        if (t.size() != 2 || t[0] != "devfp-model")
            r.fail("not a devfp model file");
        if (t[1] != std::to_string(kModelFormatVersion))
            throw Error(ErrorCode::ModelVersion,
                        "model format version " + t[1] + ", this build reads " + std::to_string(kModelFormatVersion));
    }
    const auto kind_line = r.tokens();
    if (kind_line.size() != 2 || kind_line[0] != "kind")
        r.fail("expected 'kind <name>'");
    const auto kind = parse_model_kind(kind_line[1]);
    if (!kind)
        r.fail("unknown model kind '" + kind_line[1] + "'");

    std::vector<std::string> schema(r.header("schema"));
    for (auto& name : schema)
        name = r.line();
    std::vector<std::string> classes(r.header("classes"));
    for (auto& name : classes)
        name = r.line();
    const Hyperparams hp = read_hyperparams(r);
    const std::size_t k = classes.size(), d = schema.size();

    TrainedModel::Body body;
    switch (*kind) {
    case ModelKind::j48:
    case ModelKind::random_tree:
        body = read_tree(r, k, d);
        break;
    case ModelKind::random_forest:
    case ModelKind::bagging: {
        std::vector<DecisionTree> trees(r.header("members"));
        for (auto& t : trees)
            t = read_tree(r, k, d);
        if (*kind == ModelKind::random_forest)
            body = ForestModel{std::move(trees)};
        else
            body = BaggingModel{std::move(trees)};
        break;
    }
    case ModelKind::naive_bayes: {
        NaiveBayesModel nb;
        auto t = r.tokens();
        if (t.empty() || t[0] != "priors")
            r.fail("expected priors");
        nb.priors = read_counts(r, t, 1, k);
        t = r.tokens();
        if (t.size() != d + 1 || t[0] != "seen")
            r.fail("expected seen flags");
        for (std::size_t a = 0; a < d; ++a)
            nb.attribute_seen.push_back(t[a + 1] == "1");
        nb.stats.assign(k, std::vector<GaussianEstimate>(d));
        for (std::size_t c = 0; c < k; ++c) {
            r.expect("class");
            for (std::size_t a = 0; a < d; ++a) {
                t = r.tokens();
                if (t.size() != 5 || t[0] != "gauss")
                    r.fail("expected gauss line");
                nb.stats[c][a] = {r.to_real(t[1]), r.to_real(t[2]), r.to_real(t[3]), t[4] == "1"};
            }
        }
        body = std::move(nb);
        break;
    }
    case ModelKind::vote: {
        VoteModel vote;
        const std::size_t m = r.header("members");
        for (std::size_t i = 0; i < m; ++i)
            vote.members.push_back(read_model(r));
        body = std::move(vote);
        break;
    }
    }
    r.expect("end");
    return TrainedModel(*kind, std::move(schema), std::move(classes), hp, std::move(body));
}

} // namespace

void save_model(const TrainedModel& model, std::ostream& out)
{
    out << "devfp-model " << kModelFormatVersion << '\n';
    out << "kind " << to_string(model.kind()) << '\n';
    out << "schema " << model.schema().size() << '\n';
    for (const auto& name : model.schema())
        out << name << '\n';
    out << "classes " << model.class_names().size() << '\n';
    for (const auto& name : model.class_names())
        out << name << '\n';
    write_hyperparams(out, model.hyperparams());
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, DecisionTree>) {
                write_tree(out, body);
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                out << "members " << body.trees.size() << '\n';
                for (const auto& t : body.trees)
                    write_tree(out, t);
            } else if constexpr (std::is_same_v<T, BaggingModel>) {
                out << "members " << body.members.size() << '\n';
                for (const auto& t : body.members)
                    write_tree(out, t);
            } else if constexpr (std::is_same_v<T, NaiveBayesModel>) {
                out << "priors";
                write_counts(out, body.priors);
                out << "\nseen";
                for (bool seen : body.attribute_seen)
                    out << (seen ? " 1" : " 0");
                out << '\n';
                for (const auto& per_attr : body.stats) {
                    out << "class\n";
                    for (const auto& g : per_attr)
                        out << "gauss " << real(g.mean) << ' ' << real(g.stddev) << ' ' << real(g.present_rate)
                            << ' ' << (g.observed ? 1 : 0) << '\n';
                }
            } else {
                out << "members " << body.members.size() << '\n';
                for (const auto& m : body.members)
                    save_model(m, out);
            }
        },
        model.body());
    out << "end\n";
}

std::string save_model(const TrainedModel& model)
{
    std::ostringstream out;
    save_model(model, out);
    return out.str();
}

void save_model_file(const TrainedModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    save_model(model, out);
}

TrainedModel load_model(std::istream& in)
{
    LineReader reader(in);
    return read_model(reader);
}

TrainedModel load_model(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return load_model(in);
}

TrainedModel load_model_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    return load_model(in);
}

} // namespace devfp::classifiers
