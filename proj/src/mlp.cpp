#include "fsa/mlp.hpp"

#include <cmath>

#include <json.hpp>

#include "fsa/common.hpp"
#include "fsa/rng.hpp"

namespace fsa {

using nlohmann::json;

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - m).exp();
        z.row(r) /= z.row(r).sum();
    }
    return z;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

}  // namespace

Mlp::Mlp(int input_dim, int hidden1, int hidden2) {
    w1_.resize(hidden1, input_dim);
    b1_ = Eigen::VectorXd::Zero(hidden1);
    w2_.resize(hidden2, hidden1);
    b2_ = Eigen::VectorXd::Zero(hidden2);
    w3_.resize(2, hidden2);
    b3_ = Eigen::VectorXd::Zero(2);
}

void Mlp::init(uint64_t seed) {
    // Layer 1 scale avoids fan-in so identically indexed columns match across
    // architectures that share an input block (controlled equivalence runs).
    const double s1 = std::sqrt(2.0 / static_cast<double>(w1_.rows()));
    const double s2 = std::sqrt(2.0 / static_cast<double>(w2_.cols()));
    const double s3 = std::sqrt(2.0 / static_cast<double>(w3_.cols()));
    auto fill = [seed](Eigen::MatrixXd& w, uint64_t layer, double scale) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = scale * counter_normal(seed, layer, static_cast<uint64_t>(i),
                                                 static_cast<uint64_t>(j));
            }
        }
    };
    fill(w1_, 1, s1);
    fill(w2_, 2, s2);
    fill(w3_, 3, s3);
    b1_.setZero();
    b2_.setZero();
    b3_.setZero();
}

Eigen::MatrixXd Mlp::predict_proba(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd a1 = relu((x * w1_.transpose()).rowwise() + b1_.transpose());
    const Eigen::MatrixXd a2 = relu((a1 * w2_.transpose()).rowwise() + b2_.transpose());
    return softmax_rows((a2 * w3_.transpose()).rowwise() + b3_.transpose());
}

std::vector<int> Mlp::classify(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd p = predict_proba(x);
    std::vector<int> out(static_cast<size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        out[static_cast<size_t>(r)] = p(r, 0) > p(r, 1) ? 1 : 0;
    }
    return out;
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) const {
    const Eigen::MatrixXd p = predict_proba(x);
    double total = 0.0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double prob = y(r) == 1 ? p(r, 0) : p(r, 1);
        total -= std::log(std::max(prob, kProbFloor));
    }
    return total / static_cast<double>(p.rows());
}

double Mlp::loss_and_gradients(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                               Eigen::VectorXd& grad) const {
    const Eigen::Index n = x.rows();
    const Eigen::MatrixXd z1 = (x * w1_.transpose()).rowwise() + b1_.transpose();
    const Eigen::MatrixXd a1 = relu(z1);
    const Eigen::MatrixXd z2 = (a1 * w2_.transpose()).rowwise() + b2_.transpose();
    const Eigen::MatrixXd a2 = relu(z2);
    const Eigen::MatrixXd p = softmax_rows((a2 * w3_.transpose()).rowwise() + b3_.transpose());

    double total = 0.0;
    Eigen::MatrixXd dz3(n, 2);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double prob = y(r) == 1 ? p(r, 0) : p(r, 1);
        total -= std::log(std::max(prob, kProbFloor));
        dz3(r, 0) = (p(r, 0) - (y(r) == 1 ? 1.0 : 0.0)) / static_cast<double>(n);
        dz3(r, 1) = (p(r, 1) - (y(r) == 1 ? 0.0 : 1.0)) / static_cast<double>(n);
    }

    const Eigen::MatrixXd dw3 = dz3.transpose() * a2;
    const Eigen::VectorXd db3 = dz3.colwise().sum();
    const Eigen::MatrixXd da2 = dz3 * w3_;
    const Eigen::MatrixXd dz2 =
        da2.cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd dw2 = dz2.transpose() * a1;
    const Eigen::VectorXd db2 = dz2.colwise().sum();
    const Eigen::MatrixXd da1 = dz2 * w2_;
    const Eigen::MatrixXd dz1 =
        da1.cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd dw1 = dz1.transpose() * x;
    const Eigen::VectorXd db1 = dz1.colwise().sum();

    grad.resize(parameter_count());
    Eigen::Index at = 0;
    auto put_matrix = [&grad, &at](const Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) grad(at++) = m(i, j);
    };
    auto put_vector = [&grad, &at](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) grad(at++) = v(i);
    };
    put_matrix(dw1);
    put_vector(db1);
    put_matrix(dw2);
    put_vector(db2);
    put_matrix(dw3);
    put_vector(db3);
    return total / static_cast<double>(n);
}

Eigen::Index Mlp::parameter_count() const {
    return w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() + b3_.size();
}

namespace {

// Flat (w1,b1,w2,b2,w3,b3) row-major addressing used by the gradient check.
double* parameter_slot(Eigen::MatrixXd& w1, Eigen::VectorXd& b1, Eigen::MatrixXd& w2,
                       Eigen::VectorXd& b2, Eigen::MatrixXd& w3, Eigen::VectorXd& b3,
                       Eigen::Index i) {
    Eigen::MatrixXd* mats[] = {&w1, &w2, &w3};
    Eigen::VectorXd* vecs[] = {&b1, &b2, &b3};
    for (int layer = 0; layer < 3; ++layer) {
        Eigen::MatrixXd& w = *mats[layer];
        if (i < w.size()) return &w(i / w.cols(), i % w.cols());
        i -= w.size();
        Eigen::VectorXd& b = *vecs[layer];
        if (i < b.size()) return &b(i);
        i -= b.size();
    }
    throw Error("parameter index out of range");
}

}  // namespace

double Mlp::get_parameter(Eigen::Index i) const {
    Mlp& self = const_cast<Mlp&>(*this);
    return *parameter_slot(self.w1_, self.b1_, self.w2_, self.b2_, self.w3_, self.b3_, i);
}

void Mlp::set_parameter(Eigen::Index i, double v) {
    *parameter_slot(w1_, b1_, w2_, b2_, w3_, b3_, i) = v;
}

std::string Mlp::to_json() const {
    json j;
    auto dump_matrix = [](const Eigen::MatrixXd& m) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index jj = 0; jj < m.cols(); ++jj) row.push_back(m(i, jj));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    auto dump_vector = [](const Eigen::VectorXd& v) {
        json out = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
        return out;
    };
    j["w1"] = dump_matrix(w1_);
    j["b1"] = dump_vector(b1_);
    j["w2"] = dump_matrix(w2_);
    j["b2"] = dump_vector(b2_);
    j["w3"] = dump_matrix(w3_);
    j["b3"] = dump_vector(b3_);
    return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
    const json j = json::parse(text);
    auto read_matrix = [](const json& rows) {
        Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index jj = 0; jj < m.cols(); ++jj)
                m(i, jj) = rows[static_cast<size_t>(i)][static_cast<size_t>(jj)].get<double>();
        return m;
    };
    auto read_vector = [](const json& arr) {
        Eigen::VectorXd v(arr.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = arr[static_cast<size_t>(i)].get<double>();
        return v;
    };
    Mlp m;
    m.w1_ = read_matrix(j.at("w1"));
    m.b1_ = read_vector(j.at("b1"));
    m.w2_ = read_matrix(j.at("w2"));
    m.b2_ = read_vector(j.at("b2"));
    m.w3_ = read_matrix(j.at("w3"));
    m.b3_ = read_vector(j.at("b3"));
    return m;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct MlpTrainer {
    const MlpConfig& cfg;
    Mlp net;
    Rng rng;

    // Adam moments, one pair per tensor.
    Eigen::MatrixXd mw1, vw1, mw2, vw2, mw3, vw3;
    Eigen::VectorXd mb1, vb1, mb2, vb2, mb3, vb3;
    long step = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    MlpTrainer(const MlpConfig& config)
        : cfg(config), net(config.input_dim, config.hidden1, config.hidden2),
          rng(derive_seed(config.seed, 0x7261696eULL)) {
        net.init(config.seed);
        mw1 = Eigen::MatrixXd::Zero(net.w1_.rows(), net.w1_.cols());
        vw1 = mw1;
        mw2 = Eigen::MatrixXd::Zero(net.w2_.rows(), net.w2_.cols());
        vw2 = mw2;
        mw3 = Eigen::MatrixXd::Zero(net.w3_.rows(), net.w3_.cols());
        vw3 = mw3;
        mb1 = Eigen::VectorXd::Zero(net.b1_.size());
        vb1 = mb1;
        mb2 = Eigen::VectorXd::Zero(net.b2_.size());
        vb2 = mb2;
        mb3 = Eigen::VectorXd::Zero(net.b3_.size());
        vb3 = mb3;
    }

    template <typename T>
    void adam_update(T& param, T& m, T& v, const T& g) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        param.array() -=
            cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
    }

    // Dropout masks are drawn for the hidden layers regardless of input
    // width, keeping RNG consumption aligned across architectures.
    double train_batch(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) {
        const Eigen::Index n = x.rows();
        const double keep = 1.0 - cfg.dropout;

        Eigen::MatrixXd e1 = Eigen::MatrixXd::Ones(n, net.w1_.rows());
        Eigen::MatrixXd e2 = Eigen::MatrixXd::Ones(n, net.w2_.rows());
        if (cfg.dropout > 0.0) {
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index c = 0; c < e1.cols(); ++c)
                    e1(r, c) = rng.uniform() < cfg.dropout ? 0.0 : 1.0 / keep;
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index c = 0; c < e2.cols(); ++c)
                    e2(r, c) = rng.uniform() < cfg.dropout ? 0.0 : 1.0 / keep;
        }

        const Eigen::MatrixXd z1 = (x * net.w1_.transpose()).rowwise() + net.b1_.transpose();
        const Eigen::MatrixXd a1 = relu(z1).cwiseProduct(e1);
        const Eigen::MatrixXd z2 = (a1 * net.w2_.transpose()).rowwise() + net.b2_.transpose();
        const Eigen::MatrixXd a2 = relu(z2).cwiseProduct(e2);
        const Eigen::MatrixXd p =
            softmax_rows((a2 * net.w3_.transpose()).rowwise() + net.b3_.transpose());

        double total = 0.0;
        Eigen::MatrixXd dz3(n, 2);
        for (Eigen::Index r = 0; r < n; ++r) {
            const double prob = y(r) == 1 ? p(r, 0) : p(r, 1);
            total -= std::log(std::max(prob, kProbFloor));
            dz3(r, 0) = (p(r, 0) - (y(r) == 1 ? 1.0 : 0.0)) / static_cast<double>(n);
            dz3(r, 1) = (p(r, 1) - (y(r) == 1 ? 0.0 : 1.0)) / static_cast<double>(n);
        }

        const Eigen::MatrixXd dw3 = dz3.transpose() * a2;
        const Eigen::VectorXd db3 = dz3.colwise().sum();
        const Eigen::MatrixXd da2 = dz3 * net.w3_;
        const Eigen::MatrixXd dz2 = da2.cwiseProduct(e2).cwiseProduct(
            (z2.array() > 0.0).cast<double>().matrix());
        const Eigen::MatrixXd dw2 = dz2.transpose() * a1;
        const Eigen::VectorXd db2 = dz2.colwise().sum();
        const Eigen::MatrixXd da1 = dz2 * net.w2_;
        const Eigen::MatrixXd dz1 = da1.cwiseProduct(e1).cwiseProduct(
            (z1.array() > 0.0).cast<double>().matrix());
        const Eigen::MatrixXd dw1 = dz1.transpose() * x;
        const Eigen::VectorXd db1 = dz1.colwise().sum();

        ++step;
        adam_update(net.w1_, mw1, vw1, dw1);
        adam_update(net.b1_, mb1, vb1, db1);
        adam_update(net.w2_, mw2, vw2, dw2);
        adam_update(net.b2_, mb2, vb2, db2);
        adam_update(net.w3_, mw3, vw3, dw3);
        adam_update(net.b3_, mb3, vb3, db3);
        return total / static_cast<double>(n);
    }
};

MlpTrainResult train_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                         const MlpConfig& config) {
    if (x.rows() != y.size()) throw Error("train_mlp: X/y row mismatch");
    if (x.rows() < 2) throw Error("train_mlp: too few observations");
    MlpConfig cfg = config;
    cfg.input_dim = static_cast<int>(x.cols());

    // Validation split drawn from a dedicated stream so that training-time
    // RNG consumption cannot shift it.
    std::vector<int> order(static_cast<size_t>(x.rows()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng split_rng(derive_seed(cfg.seed, 0x73706c69ULL));
    split_rng.shuffle(order);
    const size_t n_val =
        std::max<size_t>(1, static_cast<size_t>(cfg.validation_fraction *
                                                static_cast<double>(order.size())));
    std::vector<int> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
    std::vector<int> train_idx(order.begin() + static_cast<long>(n_val), order.end());
    if (train_idx.empty()) throw Error("train_mlp: empty training split");

    auto take_rows = [&x, &y](const std::vector<int>& idx, Eigen::MatrixXd& xs,
                              Eigen::VectorXi& ys) {
        xs.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
        ys.resize(static_cast<Eigen::Index>(idx.size()));
        for (size_t i = 0; i < idx.size(); ++i) {
            xs.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
            ys(static_cast<Eigen::Index>(i)) = y(idx[i]);
        }
    };
    Eigen::MatrixXd x_val;
    Eigen::VectorXi y_val;
    take_rows(val_idx, x_val, y_val);

    MlpTrainer trainer(cfg);
    MlpTrainResult result;
    result.model = trainer.net;
    double best_val = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        trainer.rng.shuffle(train_idx);
        bool nan_hit = false;
        for (size_t start = 0; start < train_idx.size();
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end =
                std::min(train_idx.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<int> batch(train_idx.begin() + static_cast<long>(start),
                                   train_idx.begin() + static_cast<long>(end));
            Eigen::MatrixXd xb;
            Eigen::VectorXi yb;
            take_rows(batch, xb, yb);
            const double batch_loss = trainer.train_batch(xb, yb);
            if (!std::isfinite(batch_loss)) {
                nan_hit = true;
                break;
            }
        }
        if (nan_hit) {
            result.aborted_nan = true;
            return result;
        }
        result.epochs_run = epoch + 1;

        const double val_loss = trainer.net.loss(x_val, y_val);
        if (!std::isfinite(val_loss)) {
            result.aborted_nan = true;
            return result;
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            result.model = trainer.net;  // keep best-validation weights
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= cfg.patience) break;
        }
    }
    result.validation_loss = best_val;
    return result;
}

GridSearchResult fit_mlp_grid(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, MlpConfig base,
                              const std::vector<double>& learning_rates,
                              const std::vector<double>& dropouts) {
    GridSearchResult out;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double lr : learning_rates) {
        for (double dropout : dropouts) {
            MlpConfig cfg = base;
            cfg.learning_rate = lr;
            cfg.dropout = dropout;
            MlpTrainResult r = train_mlp(x, y, cfg);
            if (r.aborted_nan) {
                out.diagnostics.push_back(
                    strf("grid point lr=%g dropout=%g aborted on NaN loss", lr, dropout));
                continue;
            }
            if (r.validation_loss < best) {
                best = r.validation_loss;
                out.best = std::move(r);
                out.learning_rate = lr;
                out.dropout = dropout;
                found = true;
            }
        }
    }
    if (!found) throw Error("every grid point aborted; no usable model");
    return out;
}

}  // namespace fsa
