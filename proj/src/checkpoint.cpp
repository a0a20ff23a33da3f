#include "ellreg/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "ellreg/error.hpp"

namespace ellreg {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw ParseError("bad number in checkpoint: " + token);
    return v;
}

std::string expect_word(std::istream& in, const std::string& word) {
    std::string tok;
    if (!(in >> tok) || tok != word) {
        throw ParseError("checkpoint: expected '" + word + "', got '" + tok + "'");
    }
    return tok;
}

std::size_t read_count(std::istream& in) {
    long long n = -1;
    if (!(in >> n) || n < 0) throw ParseError("checkpoint: expected a count");
    return static_cast<std::size_t>(n);
}

void read_values(std::istream& in, std::span<double> dst) {
    std::string tok;
    for (double& v : dst) {
        if (!(in >> tok)) throw ParseError("checkpoint: truncated value block");
        v = parse_double(tok);
    }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Mlp& model) {
    out << "ellreg-mlp 1\nlayer_sizes";
    for (auto s : model.layer_sizes()) out << ' ' << s;
    out << "\nactivation " << to_string(model.activation());
    if (model.activation() == Activation::LeakyReLU) out << ' ' << format_double(model.leaky_slope());
    out << "\nhead " << to_string(model.head()) << '\n';
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const Matrix& W = model.weight(l);
        out << "weight " << l << ' ' << W.rows() << ' ' << W.cols() << '\n';
        for (std::size_t r = 0; r < W.rows(); ++r) {
            for (std::size_t c = 0; c < W.cols(); ++c) {
                out << (c ? " " : "") << format_double(W(r, c));
            }
            out << '\n';
        }
        out << "bias " << l << ' ' << model.bias(l).size() << '\n';
        for (std::size_t i = 0; i < model.bias(l).size(); ++i) {
            out << (i ? " " : "") << format_double(model.bias(l)[i]);
        }
        out << '\n';
    }
}

Mlp read_checkpoint(std::istream& in) {
    expect_word(in, "ellreg-mlp");
    if (read_count(in) != 1) throw ParseError("checkpoint: unsupported version");
    expect_word(in, "layer_sizes");

    std::string line;
    std::getline(in, line);
    std::istringstream sizes_in(line);
    std::vector<std::size_t> sizes;
    long long s = 0;
    while (sizes_in >> s) {
        if (s <= 0) throw ParseError("checkpoint: non-positive layer size");
        sizes.push_back(static_cast<std::size_t>(s));
    }

    expect_word(in, "activation");
    std::string act_name;
    in >> act_name;
    Activation act = Activation::ReLU;
    double slope = 0.1;
    if (act_name == "leaky_relu") {
        act = Activation::LeakyReLU;
        std::string tok;
        in >> tok;
        slope = parse_double(tok);
    } else if (act_name != "relu") {
        throw ParseError("checkpoint: unknown activation " + act_name);
    }

    expect_word(in, "head");
    std::string head_name;
    in >> head_name;
    OutputHead head = OutputHead::Linear;
    if (head_name == "softmax") {
        head = OutputHead::Softmax;
    } else if (head_name != "linear") {
        throw ParseError("checkpoint: unknown head " + head_name);
    }

    Mlp model(sizes, act, head, slope);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        expect_word(in, "weight");
        Matrix& W = model.weight(l);
        if (read_count(in) != l || read_count(in) != W.rows() || read_count(in) != W.cols()) {
            throw ParseError("checkpoint: weight block header mismatch at layer " +
                             std::to_string(l));
        }
        read_values(in, W.values());
        expect_word(in, "bias");
        if (read_count(in) != l || read_count(in) != model.bias(l).size()) {
            throw ParseError("checkpoint: bias block header mismatch at layer " + std::to_string(l));
        }
        read_values(in, model.bias(l));
    }
    if (!model.params().all_finite()) throw ParseError("checkpoint contains non-finite values");
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const Mlp& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    write_checkpoint(out, model);
}

Mlp load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace ellreg
