#include "fewshot/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/common.hpp"

namespace fewshot {

CeResult cross_entropy_with_grad(const Tensor& logits, const std::vector<long>& targets) {
    check_arg(logits.ndim() == 2, "cross_entropy: logits must be batch x classes");
    const long b = logits.dim(0), c = logits.dim(1);
    check_arg(static_cast<long>(targets.size()) == b,
              "cross_entropy: target count mismatch");
    CeResult res;
    res.dlogits = Tensor({b, c});
    double loss_sum = 0.0;
    long correct = 0;
    for (long i = 0; i < b; ++i) {
        const long t = targets[static_cast<size_t>(i)];
        check_arg(t >= 0 && t < c, cat("cross_entropy: target ", t, " out of [0,", c, ")"));
        double maxv = logits.at(i, 0);
        long argmax = 0;
        for (long j = 1; j < c; ++j)
            if (logits.at(i, j) > maxv) {
                maxv = logits.at(i, j);
                argmax = j;
            }
        double sum = 0.0;
        for (long j = 0; j < c; ++j) sum += std::exp(logits.at(i, j) - maxv);
        const double lse = maxv + std::log(sum);
        loss_sum += lse - logits.at(i, t);
        if (argmax == t) ++correct;
        for (long j = 0; j < c; ++j) {
            const double p = std::exp(logits.at(i, j) - maxv) / sum;
            res.dlogits.at(i, j) = (p - (j == t ? 1.0 : 0.0)) / static_cast<double>(b);
        }
    }
    res.loss = loss_sum / static_cast<double>(b);
    res.accuracy = static_cast<double>(correct) / static_cast<double>(b);
    return res;
}

double cross_entropy(const Tensor& logits, const std::vector<long>& targets) {
    return cross_entropy_with_grad(logits, targets).loss;
}

Tensor class_prototypes(const Tensor& support, const std::vector<long>& labels,
                        long n_way) {
    check_arg(support.ndim() == 2, "class_prototypes: support must be NK x D");
    const long nk = support.dim(0), d = support.dim(1);
    check_arg(static_cast<long>(labels.size()) == nk,
              "class_prototypes: label count mismatch");
    Tensor proto({n_way, d});
    std::vector<long> counts(static_cast<size_t>(n_way), 0);
    for (long i = 0; i < nk; ++i) {
        const long l = labels[static_cast<size_t>(i)];
        check_arg(l >= 0 && l < n_way, "class_prototypes: label out of range");
        ++counts[static_cast<size_t>(l)];
        for (long j = 0; j < d; ++j) proto.at(l, j) += support.at(i, j);
    }
    for (long l = 0; l < n_way; ++l) {
        check(counts[static_cast<size_t>(l)] > 0,
              cat("class_prototypes: class ", l, " has no support examples"));
        for (long j = 0; j < d; ++j)
            proto.at(l, j) /= static_cast<double>(counts[static_cast<size_t>(l)]);
    }
    return proto;
}

ProtoResult prototype_loss(const Tensor& support, const std::vector<long>& support_labels,
                           const Tensor& query, const std::vector<long>& query_labels,
                           bool with_grad) {
    check_arg(query.ndim() == 2 && support.ndim() == 2 && query.dim(1) == support.dim(1),
              "prototype_loss: embedding dims disagree");
    long n_way = 0;
    for (long l : support_labels) n_way = std::max(n_way, l + 1);
    for (long l : query_labels)
        check_arg(l >= 0 && l < n_way, "prototype_loss: query label out of range");

    ProtoResult res;
    res.prototypes = class_prototypes(support, support_labels, n_way);
    const long q = query.dim(0), d = query.dim(1);
    res.logits = Tensor({q, n_way});
    for (long i = 0; i < q; ++i) {
        for (long l = 0; l < n_way; ++l) {
            double dist = 0.0;
            for (long j = 0; j < d; ++j) {
                const double diff = query.at(i, j) - res.prototypes.at(l, j);
                dist += diff * diff;
            }
            res.logits.at(i, l) = -dist;
        }
    }
    CeResult ce = cross_entropy_with_grad(res.logits, query_labels);
    res.loss = ce.loss;
    res.accuracy = ce.accuracy;
    if (!with_grad) return res;

    // dlogits[i,l] flows into the query row and, via the class mean, into
    // every support row of class l.
    res.dquery = Tensor(query.shape);
    Tensor dproto({n_way, d});
    for (long i = 0; i < q; ++i) {
        for (long l = 0; l < n_way; ++l) {
            const double g = ce.dlogits.at(i, l);
            if (g == 0.0) continue;
            for (long j = 0; j < d; ++j) {
                const double diff = query.at(i, j) - res.prototypes.at(l, j);
                res.dquery.at(i, j) += g * (-2.0) * diff;
                dproto.at(l, j) += g * 2.0 * diff;
            }
        }
    }
    std::vector<long> counts(static_cast<size_t>(n_way), 0);
    for (long l : support_labels) ++counts[static_cast<size_t>(l)];
    res.dsupport = Tensor(support.shape);
    for (long i = 0; i < support.dim(0); ++i) {
        const long l = support_labels[static_cast<size_t>(i)];
        const double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(l)]);
        for (long j = 0; j < d; ++j) res.dsupport.at(i, j) = dproto.at(l, j) * inv;
    }
    return res;
}

CeResult jigsaw_loss(const Tensor& logits, const std::vector<long>& perm_indices) {
    return cross_entropy_with_grad(logits, perm_indices);
}

CeResult rotation_loss(const Tensor& logits, const std::vector<long>& angle_indices) {
    check_arg(logits.ndim() == 2 && logits.dim(1) == 4,
              "rotation_loss: logits must be batch x 4");
    return cross_entropy_with_grad(logits, angle_indices);
}

double combine(double supervised, double self_supervised) {
    check(std::isfinite(supervised) && std::isfinite(self_supervised),
          cat("combine: non-finite loss (supervised=", supervised,
              ", self_supervised=", self_supervised, ")"));
    return supervised + self_supervised;
}

}  // namespace fewshot
