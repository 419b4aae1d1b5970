#include "hybridctl/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace hybridctl {

namespace {

using nlohmann::json;

json mat_to_json(const Mat& M) {
    json j;
    j["shape"] = {M.rows(), M.cols()};
    json data = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(i, c));
    j["data"] = std::move(data);
    return j;
}

json vec_to_json(const Vec& v) {
    json j;
    j["shape"] = {v.size()};
    json data = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v(i));
    j["data"] = std::move(data);
    return j;
}

json scalar_to_json(double x) {
    json j;
    j["shape"] = json::array();
    j["data"] = {x};
    return j;
}

Mat mat_from_json(const json& j) {
    const auto& shape = j.at("shape");
    if (shape.size() != 2) throw std::runtime_error("checkpoint: expected matrix shape");
    Mat M(shape[0].get<Eigen::Index>(), shape[1].get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != M.size())
        throw std::runtime_error("checkpoint: tensor data size mismatch");
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index c = 0; c < M.cols(); ++c) M(i, c) = data[k++].get<double>();
    return M;
}

Vec vec_from_json(const json& j) {
    const auto& shape = j.at("shape");
    if (shape.size() != 1) throw std::runtime_error("checkpoint: expected vector shape");
    Vec v(shape[0].get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != v.size())
        throw std::runtime_error("checkpoint: tensor data size mismatch");
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = data[i].get<double>();
    return v;
}

double scalar_from_json(const json& j) {
    return j.at("data").at(0).get<double>();
}

json load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    json j;
    in >> j;
    if (j.value("format", "") != "hybridctl-checkpoint-v1")
        throw std::runtime_error("checkpoint: unrecognized format in " + path);
    return j;
}

void save_file(json tensors, const std::string& path) {
    json j;
    j["format"] = "hybridctl-checkpoint-v1";
    j["tensors"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace

void save_dyn_net(const DynNet& net, const std::string& path) {
    json t;
    t["W1"] = mat_to_json(net.W1);
    t["b1"] = vec_to_json(net.b1);
    t["W2"] = mat_to_json(net.W2);
    t["b2"] = vec_to_json(net.b2);
    t["log_sigma"] = vec_to_json(net.log_sigma);
    t["nonlin"] = scalar_to_json(net.nonlin == Nonlin::Sin ? 0.0 : 1.0);
    save_file(std::move(t), path);
}

DynNet load_dyn_net(const std::string& path) {
    json j = load_file(path);
    const auto& t = j.at("tensors");
    DynNet net;
    net.W1 = mat_from_json(t.at("W1"));
    net.b1 = vec_from_json(t.at("b1"));
    net.W2 = mat_from_json(t.at("W2"));
    net.b2 = vec_from_json(t.at("b2"));
    net.log_sigma = vec_from_json(t.at("log_sigma"));
    net.nonlin = scalar_from_json(t.at("nonlin")) == 0.0 ? Nonlin::Sin : Nonlin::Relu;
    return net;
}

void save_reward_net(const RewardNet& net, const std::string& path) {
    json t;
    t["W1"] = mat_to_json(net.W1);
    t["b1"] = vec_to_json(net.b1);
    t["W2"] = vec_to_json(net.W2.transpose());
    t["b2"] = scalar_to_json(net.b2);
    t["state_dim"] = scalar_to_json(static_cast<double>(net.state_dim()));
    save_file(std::move(t), path);
}

RewardNet load_reward_net(const std::string& path) {
    json j = load_file(path);
    const auto& t = j.at("tensors");
    RewardNet net;
    net.W1 = mat_from_json(t.at("W1"));
    net.b1 = vec_from_json(t.at("b1"));
    net.W2 = vec_from_json(t.at("W2")).transpose();
    net.b2 = scalar_from_json(t.at("b2"));
    net.state_dim_ = static_cast<int>(scalar_from_json(t.at("state_dim")));
    return net;
}

void save_policy_net(const PolicyNet& net, const std::string& path) {
    json t;
    t["mean_W1"] = mat_to_json(net.mean_W1);
    t["mean_b1"] = vec_to_json(net.mean_b1);
    t["mean_W2"] = mat_to_json(net.mean_W2);
    t["mean_b2"] = vec_to_json(net.mean_b2);
    t["var_W1"] = mat_to_json(net.var_W1);
    t["var_b1"] = vec_to_json(net.var_b1);
    t["var_W2"] = mat_to_json(net.var_W2);
    t["var_b2"] = vec_to_json(net.var_b2);
    save_file(std::move(t), path);
}

PolicyNet load_policy_net(const std::string& path) {
    json j = load_file(path);
    const auto& t = j.at("tensors");
    PolicyNet net;
    net.mean_W1 = mat_from_json(t.at("mean_W1"));
    net.mean_b1 = vec_from_json(t.at("mean_b1"));
    net.mean_W2 = mat_from_json(t.at("mean_W2"));
    net.mean_b2 = vec_from_json(t.at("mean_b2"));
    net.var_W1 = mat_from_json(t.at("var_W1"));
    net.var_b1 = vec_from_json(t.at("var_b1"));
    net.var_W2 = mat_from_json(t.at("var_W2"));
    net.var_b2 = vec_from_json(t.at("var_b2"));
    return net;
}

}  // namespace hybridctl
