#include "psilab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psilab {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kStationaryTol = 1e-10;

void validate_rows(const std::vector<std::vector<double>>& rows, size_t width) {
  for (const auto& row : rows) {
    if (row.size() != width) fail(Errc::config, "transition row width mismatch");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::config, "transition entries must be finite and >= 0");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > kRowSumTol) fail(Errc::config, "transition row does not sum to 1");
  }
}

struct SccResult {
  std::vector<int> component;  // node -> scc id
  int count = 0;
};

// Iterative Tarjan on the positive-transition graph.
SccResult strongly_connected_components(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  SccResult res;
  res.component.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0), stack, call_node, call_edge;
  std::vector<char> on_stack(n, 0);
  int next_index = 0;
  for (int start = 0; start < n; ++start) {
    if (index[start] != -1) continue;
    call_node.push_back(start);
    call_edge.push_back(0);
    index[start] = low[start] = next_index++;
    stack.push_back(start);
    on_stack[start] = 1;
    while (!call_node.empty()) {
      int v = call_node.back();
      int& ei = call_edge.back();
      if (ei < static_cast<int>(adj[v].size())) {
        int w = adj[v][ei++];
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call_node.push_back(w);
          call_edge.push_back(0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            res.component[w] = res.count;
            if (w == v) break;
          }
          ++res.count;
        }
        call_node.pop_back();
        call_edge.pop_back();
        if (!call_node.empty()) {
          int parent = call_node.back();
          low[parent] = std::min(low[parent], low[v]);
        }
      }
    }
  }
  return res;
}

std::vector<std::vector<int>> adjacency(const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<int>> adj(rows.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      if (rows[i][j] > 0.0) adj[i].push_back(static_cast<int>(j));
  return adj;
}

// Period of one SCC: gcd over intra-class edges of depth(u) + 1 - depth(v).
int scc_period(const std::vector<std::vector<int>>& adj, const std::vector<int>& component, int id,
               int root) {
  std::vector<long> depth(adj.size(), -1);
  std::vector<int> queue{root};
  depth[root] = 0;
  long g = 0;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    int u = queue[qi];
    for (int v : adj[u]) {
      if (component[v] != id) continue;
      if (depth[v] == -1) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      }
      g = std::gcd(g, depth[u] + 1 - depth[v]);
    }
  }
  return g == 0 ? 0 : static_cast<int>(std::labs(g));
}

// Gaussian elimination with partial pivoting for pi P = pi, sum(pi) = 1.
std::vector<double> solve_stationary(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0), b(n, 0.0);
  // Rows 0..n-2: (P^T - I) pi = 0; last row: sum(pi) = 1.
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j < n; ++j) a[static_cast<size_t>(i) * n + j] = rows[j][i] - (i == j ? 1.0 : 0.0);
  }
  for (int j = 0; j < n; ++j) a[static_cast<size_t>(n - 1) * n + j] = 1.0;
  b[n - 1] = 1.0;

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[static_cast<size_t>(r) * n + col]) > std::fabs(a[static_cast<size_t>(pivot) * n + col]))
        pivot = r;
    if (std::fabs(a[static_cast<size_t>(pivot) * n + col]) < 1e-13)
      fail(Errc::not_irreducible, "stationary system is singular");
    if (pivot != col) {
      for (int j = 0; j < n; ++j)
        std::swap(a[static_cast<size_t>(pivot) * n + j], a[static_cast<size_t>(col) * n + j]);
      std::swap(b[pivot], b[col]);
    }
    const double inv = 1.0 / a[static_cast<size_t>(col) * n + col];
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<size_t>(r) * n + col] * inv;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j)
        a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> pi(n);
  for (int i = 0; i < n; ++i) pi[i] = b[i] / a[static_cast<size_t>(i) * n + i];
  double sum = 0.0;
  for (double& v : pi) {
    if (v < 0.0 && v > -1e-10) v = 0.0;
    if (v < 0.0) fail(Errc::not_irreducible, "stationary solve produced a negative entry");
    sum += v;
  }
  for (double& v : pi) v /= sum;
  return pi;
}

}  // namespace

long ipow(int base, int exp) {
  long v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

long ipow_checked(int base, int exp, long cap, Errc code, const char* what) {
  long v = 1;
  for (int i = 0; i < exp; ++i) {
    if (v > cap / base) fail(code, what);
    v *= base;
  }
  if (v > cap) fail(code, what);
  return v;
}

CylinderLaw::CylinderLaw(int alphabet, int horizon, std::vector<double> probs)
    : alphabet_(alphabet), horizon_(horizon), p_(std::move(probs)) {
  if (alphabet_ < 1 || horizon_ < 0) fail(Errc::config, "bad cylinder law shape");
  if (static_cast<long>(p_.size()) != ipow(alphabet_, horizon_))
    fail(Errc::config, "cylinder law size does not match |X|^n");
}

long CylinderLaw::encode(std::span<const int> w) const {
  if (static_cast<int>(w.size()) != horizon_) fail(Errc::length_mismatch, "word length != horizon");
  long code = 0;
  for (int s : w) {
    if (s < 0 || s >= alphabet_) fail(Errc::config, "symbol out of range");
    code = code * alphabet_ + s;
  }
  return code;
}

Word CylinderLaw::decode(long code) const {
  Word w(horizon_);
  for (int i = horizon_ - 1; i >= 0; --i) {
    w[i] = static_cast<int>(code % alphabet_);
    code /= alphabet_;
  }
  return w;
}

double CylinderLaw::total_variation(const CylinderLaw& other) const {
  if (other.alphabet_ != alphabet_ || other.horizon_ != horizon_)
    fail(Errc::length_mismatch, "cylinder law shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < p_.size(); ++i) acc += std::fabs(p_[i] - other.p_[i]);
  return 0.5 * acc;
}

void CylinderLaw::validate(double tol) const {
  double sum = 0.0;
  for (double v : p_) {
    if (v < -tol || !std::isfinite(v)) fail(Errc::config, "cylinder law entry out of range");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > tol) fail(Errc::config, "cylinder law mass differs from 1");
}

MarkovSource::MarkovSource(std::vector<std::string> symbols, int order,
                           std::vector<double> transition, std::vector<double> stationary)
    : alphabet_(static_cast<int>(symbols.size())),
      order_(order),
      hist_count_(ipow(static_cast<int>(symbols.size()), order)),
      hist_shift_(ipow(static_cast<int>(symbols.size()), order - 1)),
      symbols_(std::move(symbols)),
      transition_(std::move(transition)),
      stationary_(std::move(stationary)) {
  if (alphabet_ < 1) fail(Errc::config, "empty alphabet");
  if (order_ < 1) fail(Errc::config, "order must be >= 1");
  if (static_cast<long>(transition_.size()) != hist_count_ * alphabet_)
    fail(Errc::config, "transition table size mismatch");
  if (static_cast<long>(stationary_.size()) != hist_count_)
    fail(Errc::config, "stationary law size mismatch");

  // pi must be invariant under the induced history chain.
  std::vector<double> next(hist_count_, 0.0);
  for (long h = 0; h < hist_count_; ++h) {
    if (stationary_[h] == 0.0) continue;
    const long base = (h % hist_shift_) * alphabet_;
    for (int y = 0; y < alphabet_; ++y)
      next[base + y] += stationary_[h] * transition_[h * alphabet_ + y];
  }
  for (long h = 0; h < hist_count_; ++h)
    if (std::fabs(next[h] - stationary_[h]) > kStationaryTol)
      fail(Errc::config, "stationary law is not invariant under the transition table");

  prefix_marginals_.resize(order_ + 1);
  prefix_marginals_[order_] = stationary_;
  for (int j = order_ - 1; j >= 0; --j) {
    const long sz = ipow(alphabet_, j);
    prefix_marginals_[j].assign(sz, 0.0);
    for (long c = 0; c < sz; ++c) {
      double acc = 0.0;
      for (int y = 0; y < alphabet_; ++y) acc += prefix_marginals_[j + 1][c * alphabet_ + y];
      prefix_marginals_[j][c] = acc;
    }
  }
}

MarkovSource MarkovSource::first_order(std::vector<std::string> symbols,
                                       const std::vector<std::vector<double>>& rows) {
  return order_m(std::move(symbols), 1, rows);
}

MarkovSource MarkovSource::order_m(std::vector<std::string> symbols, int order,
                                   const std::vector<std::vector<double>>& history_rows,
                                   const EnumerationCaps& caps) {
  const int S = static_cast<int>(symbols.size());
  if (S < 1) fail(Errc::config, "empty alphabet");
  if (order < 1) fail(Errc::config, "order must be >= 1");
  const long hist = ipow_checked(S, order, caps.max_states, Errc::alphabet_too_large,
                                 "|X|^order exceeds the enumeration cap");
  if (static_cast<long>(history_rows.size()) != hist)
    fail(Errc::config, "expected one transition row per length-m history");
  validate_rows(history_rows, static_cast<size_t>(S));

  // Stationary law of the induced chain on histories. Solved densely, so the
  // history count is capped.
  if (hist > 2048) fail(Errc::alphabet_too_large, "history space too large for the stationary solve");
  std::vector<std::vector<double>> induced(hist, std::vector<double>(hist, 0.0));
  const long shift = ipow(S, order - 1);
  for (long h = 0; h < hist; ++h)
    for (int y = 0; y < S; ++y) induced[h][(h % shift) * S + y] += history_rows[h][y];

  const auto scc = strongly_connected_components(adjacency(induced));
  std::vector<char> has_exit(scc.count, 0);
  for (long h = 0; h < hist; ++h)
    for (long g = 0; g < hist; ++g)
      if (induced[h][g] > 0.0 && scc.component[h] != scc.component[g]) has_exit[scc.component[h]] = 1;
  int recurrent = 0;
  for (int c = 0; c < scc.count; ++c)
    if (!has_exit[c]) ++recurrent;
  if (recurrent > 1) fail(Errc::not_irreducible, "multiple recurrent classes: stationary law not unique");

  std::vector<double> pi = solve_stationary(induced);
  std::vector<double> flat(hist * S);
  for (long h = 0; h < hist; ++h)
    for (int y = 0; y < S; ++y) flat[h * S + y] = history_rows[h][y];
  return MarkovSource(std::move(symbols), order, std::move(flat), std::move(pi));
}

double MarkovSource::prefix_marginal(std::span<const int> w) const {
  const int j = static_cast<int>(w.size());
  if (j > order_) fail(Errc::length_mismatch, "prefix longer than the order");
  long code = 0;
  for (int s : w) code = code * alphabet_ + s;
  return prefix_marginals_[j][code];
}

MarkovSource::Context MarkovSource::context_of(std::span<const int> word) const {
  Context ctx;
  const size_t take = std::min<size_t>(word.size(), static_cast<size_t>(order_));
  for (size_t i = word.size() - take; i < word.size(); ++i) ctx = advance(ctx, word[i]);
  return ctx;
}

MarkovSource::Context MarkovSource::advance(Context ctx, int symbol) const {
  if (ctx.length < order_) return {ctx.length + 1, ctx.code * alphabet_ + symbol};
  return {order_, (ctx.code % hist_shift_) * alphabet_ + symbol};
}

double MarkovSource::step_probability(Context ctx, int symbol) const {
  if (ctx.length == order_) return transition_[ctx.code * alphabet_ + symbol];
  const double den = prefix_marginals_[ctx.length][ctx.code];
  if (den == 0.0) return 0.0;
  return prefix_marginals_[ctx.length + 1][ctx.code * alphabet_ + symbol] / den;
}

void MarkovSource::step_distribution(Context ctx, std::span<double> out) const {
  for (int y = 0; y < alphabet_; ++y) out[y] = step_probability(ctx, y);
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition) {
  if (transition.empty()) fail(Errc::config, "empty transition table");
  if (transition.size() > 4096) fail(Errc::alphabet_too_large, "state space too large for the dense solve");
  validate_rows(transition, transition.size());
  const auto scc = strongly_connected_components(adjacency(transition));
  std::vector<char> has_exit(scc.count, 0);
  for (size_t i = 0; i < transition.size(); ++i)
    for (size_t j = 0; j < transition.size(); ++j)
      if (transition[i][j] > 0.0 && scc.component[i] != scc.component[j])
        has_exit[scc.component[i]] = 1;
  int recurrent = 0;
  for (int c = 0; c < scc.count; ++c)
    if (!has_exit[c]) ++recurrent;
  if (recurrent > 1) fail(Errc::not_irreducible, "multiple recurrent classes: stationary law not unique");
  return solve_stationary(transition);
}

ClassificationReport classify_transition(const std::vector<std::vector<double>>& transition) {
  if (transition.empty()) fail(Errc::config, "empty transition table");
  validate_rows(transition, transition.size());
  const auto adj = adjacency(transition);
  const auto scc = strongly_connected_components(adj);
  const int n = static_cast<int>(transition.size());

  std::vector<char> has_exit(scc.count, 0);
  for (int i = 0; i < n; ++i)
    for (int j : adj[i])
      if (scc.component[i] != scc.component[j]) has_exit[scc.component[i]] = 1;

  ClassificationReport rep;
  rep.irreducible = (scc.count == 1);
  std::vector<int> root(scc.count, -1);
  for (int i = 0; i < n; ++i)
    if (root[scc.component[i]] == -1) root[scc.component[i]] = i;
  long g = 0;
  for (int c = 0; c < scc.count; ++c) {
    if (has_exit[c]) continue;
    ++rep.recurrent_classes;
    const int p = scc_period(adj, scc.component, c, root[c]);
    if (p > 0) g = std::gcd(g, static_cast<long>(p));
  }
  rep.period = g == 0 ? 1 : static_cast<int>(g);
  rep.aperiodic = (rep.period == 1);
  return rep;
}

ClassificationReport check_irreducible_aperiodic(const MarkovSource& src) {
  const long hist = src.history_count();
  if (hist > 4096) fail(Errc::alphabet_too_large, "history space too large to classify densely");
  std::vector<std::vector<double>> induced(hist, std::vector<double>(hist, 0.0));
  const long shift = std::max(1L, ipow(src.alphabet_size(), src.order() - 1));
  for (long h = 0; h < hist; ++h)
    for (int y = 0; y < src.alphabet_size(); ++y)
      induced[h][(h % shift) * src.alphabet_size() + y] += src.transition(h, y);
  return classify_transition(induced);
}

namespace {

// Forward DP over contexts with per-position constraints (-1 = free).
// Returns the context length and the weight vector over context codes.
std::pair<int, std::vector<double>> forward_weights(const MarkovSource& src,
                                                    std::span<const int> pattern) {
  const int S = src.alphabet_size();
  int len = 0;
  std::vector<double> w{1.0};
  for (int pos = 0; pos < static_cast<int>(pattern.size()); ++pos) {
    const int nlen = std::min(len + 1, src.order());
    std::vector<double> nw(ipow(S, nlen), 0.0);
    const int want = pattern[pos];
    for (long code = 0; code < static_cast<long>(w.size()); ++code) {
      const double weight = w[code];
      if (weight == 0.0) continue;
      const MarkovSource::Context ctx{len, code};
      for (int y = 0; y < S; ++y) {
        if (want >= 0 && y != want) continue;
        const double p = src.step_probability(ctx, y);
        if (p == 0.0) continue;
        nw[src.advance(ctx, y).code] += weight * p;
      }
    }
    w = std::move(nw);
    len = nlen;
  }
  return {len, std::move(w)};
}

// Law of the next T symbols given a weight vector over contexts.
std::vector<double> suffix_law(const MarkovSource& src, int len, const std::vector<double>& weights,
                               int T, const EnumerationCaps& caps) {
  const int S = src.alphabet_size();
  const long out_size =
      ipow_checked(S, T, caps.max_states, Errc::horizon_too_large, "|X|^T exceeds the enumeration cap");
  if (out_size > 0 && static_cast<long>(weights.size()) > (1L << 24) / out_size)
    fail(Errc::cap_exceeded, "suffix enumeration too large");
  std::vector<double> law(out_size, 0.0);

  // Depth-first over the suffix tree, carrying per-context weights.
  auto descend = [&](auto&& self, int depth, long code, int clen, const std::vector<double>& w) -> void {
    if (depth == T) {
      double acc = 0.0;
      for (double v : w) acc += v;
      law[code] = acc;
      return;
    }
    const int nlen = std::min(clen + 1, src.order());
    for (int y = 0; y < S; ++y) {
      std::vector<double> nw(ipow(S, nlen), 0.0);
      bool any = false;
      for (long c = 0; c < static_cast<long>(w.size()); ++c) {
        if (w[c] == 0.0) continue;
        const MarkovSource::Context ctx{clen, c};
        const double p = src.step_probability(ctx, y);
        if (p == 0.0) continue;
        nw[src.advance(ctx, y).code] += w[c] * p;
        any = true;
      }
      if (!any) continue;
      self(self, depth + 1, code * S + y, nlen, nw);
    }
  };
  descend(descend, 0, 0, len, weights);
  return law;
}

}  // namespace

CylinderLaw marginal_law(const MarkovSource& src, int T, const EnumerationCaps& caps) {
  if (T < 0) fail(Errc::config, "horizon must be >= 0");
  std::vector<double> start{1.0};
  return CylinderLaw(src.alphabet_size(), T, suffix_law(src, 0, start, T, caps));
}

CylinderLaw conditional_law(const MarkovSource& src, const Word& prefix, int gap, int T,
                            const EnumerationCaps& caps) {
  if (prefix.empty()) fail(Errc::config, "prefix must be nonempty");
  if (gap < 0 || T < 1) fail(Errc::config, "need gap >= 0 and horizon >= 1");
  const double pp = cylinder_probability(src, prefix);
  if (pp == 0.0) fail(Errc::zero_probability_prefix, "conditioning prefix has probability zero");

  std::vector<int> pattern(prefix.begin(), prefix.end());
  pattern.insert(pattern.end(), static_cast<size_t>(gap), -1);
  auto [len, weights] = forward_weights(src, pattern);
  std::vector<double> law = suffix_law(src, len, weights, T, caps);
  for (double& v : law) v /= pp;
  return CylinderLaw(src.alphabet_size(), T, std::move(law));
}

double cylinder_probability(const MarkovSource& src, std::span<const int> word) {
  if (word.empty()) return 1.0;
  const int head = std::min<int>(static_cast<int>(word.size()), src.order());
  double p = src.prefix_marginal(word.subspan(0, head));
  if (p == 0.0) return 0.0;
  MarkovSource::Context ctx = src.context_of(word.subspan(0, head));
  for (size_t i = head; i < word.size(); ++i) {
    p *= src.step_probability(ctx, word[i]);
    if (p == 0.0) return 0.0;
    ctx = src.advance(ctx, word[i]);
  }
  return p;
}

double constrained_probability(const MarkovSource& src, std::span<const int> pattern) {
  auto [len, weights] = forward_weights(src, pattern);
  (void)len;
  double acc = 0.0;
  for (double v : weights) acc += v;
  return acc;
}

MarkovSource block_process(const MarkovSource& src, int L, const EnumerationCaps& caps) {
  if (L < 1) fail(Errc::config, "block length must be >= 1");
  const int S = src.alphabet_size();
  const long block_states =
      ipow_checked(S, L, caps.max_states, Errc::alphabet_too_large, "|X|^L exceeds the alphabet cap");
  const int new_order = (src.order() + L - 1) / L;
  const long hist_syms = static_cast<long>(new_order) * L;
  const long hist_count = ipow_checked(S, static_cast<int>(hist_syms), caps.max_states,
                                       Errc::alphabet_too_large, "blocked history space exceeds cap");
  if (hist_count > (1L << 24) / std::max(1L, block_states))
    fail(Errc::alphabet_too_large, "blocked transition table exceeds cap");

  std::vector<std::string> names(block_states);
  {
    Word w(L);
    for (long c = 0; c < block_states; ++c) {
      long v = c;
      for (int i = L - 1; i >= 0; --i) {
        w[i] = static_cast<int>(v % S);
        v /= S;
      }
      std::string name;
      for (int s : w) name += src.symbols()[s];
      names[c] = std::move(name);
    }
  }

  std::vector<double> flat(hist_count * block_states, 0.0);
  Word hist_word(hist_syms);
  Word blk(L);
  for (long h = 0; h < hist_count; ++h) {
    long v = h;
    for (long i = hist_syms - 1; i >= 0; --i) {
      hist_word[i] = static_cast<int>(v % S);
      v /= S;
    }
    const MarkovSource::Context base = src.context_of(hist_word);
    for (long bc = 0; bc < block_states; ++bc) {
      long bv = bc;
      for (int i = L - 1; i >= 0; --i) {
        blk[i] = static_cast<int>(bv % S);
        bv /= S;
      }
      double p = 1.0;
      MarkovSource::Context ctx = base;
      for (int i = 0; i < L && p > 0.0; ++i) {
        p *= src.step_probability(ctx, blk[i]);
        ctx = src.advance(ctx, blk[i]);
      }
      flat[h * block_states + bc] = p;
    }
  }

  // The stationary law of the blocked history is the parent window law; it is
  // supplied directly rather than re-solved so null block states are fine.
  CylinderLaw window = marginal_law(src, static_cast<int>(hist_syms), caps);
  std::vector<double> stationary(window.probabilities().begin(), window.probabilities().end());
  return MarkovSource(std::move(names), new_order, std::move(flat), std::move(stationary));
}

double block_entropy_bits(const MarkovSource& src, int T) {
  if (T < 1) fail(Errc::config, "horizon must be >= 1");
  const int S = src.alphabet_size();
  const int m = src.order();
  auto entropy = [](std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
      if (v > 0.0) h -= v * std::log2(v);
    return h;
  };
  if (T <= m) {
    std::vector<double> marg(ipow(S, T), 0.0);
    const long tail = ipow(S, m - T);
    const auto& pi = src.stationary_histories();
    for (long h = 0; h < static_cast<long>(pi.size()); ++h) marg[h / tail] += pi[h];
    return entropy(marg);
  }
  double h_head = entropy(src.stationary_histories());
  double h_step = 0.0;
  const auto& pi = src.stationary_histories();
  for (long h = 0; h < static_cast<long>(pi.size()); ++h) {
    if (pi[h] == 0.0) continue;
    h_step += pi[h] * entropy(src.transition_row(h));
  }
  return h_head + (T - m) * h_step;
}

}  // namespace psilab
