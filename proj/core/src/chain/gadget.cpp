#include "icmr/chain/gadget.hpp"

#include <spdlog/spdlog.h>

namespace icmr::chain {

const char* item_kind(const Item& item) {
  static constexpr const char* kinds[] = {"readout", "image",  "waveform",    "text",
                                          "report",  "bucket", "image_group", "inference"};
  return kinds[item.index()];
}

void GadgetRegistry::add(const std::string& name, GadgetFactory factory) {
  if (!factories_.emplace(name, std::move(factory)).second) {
    throw std::invalid_argument("gadget '" + name + "' registered twice");
  }
}

std::unique_ptr<Gadget> GadgetRegistry::create(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw AssemblyError("unregistered gadget '" + name + "'");
  return it->second();
}

std::vector<std::string> GadgetRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

Chain Chain::assemble(const ChainConfig& config, const GadgetRegistry& registry,
                      const ConnectionContext& connection) {
  if (config.gadgets.empty()) throw AssemblyError("chain has no gadgets");
  Chain chain;
  chain.name_ = config.name;
  for (const auto& spec : config.gadgets) {
    if (!registry.contains(spec.name)) throw AssemblyError("unregistered gadget '" + spec.name + "'");
  }
  for (const auto& spec : config.gadgets) {
    chain.names_.push_back(spec.name);
    chain.stages_.push_back(registry.create(spec.name));
  }
  for (std::size_t i = 0; i < config.gadgets.size(); ++i) {
    GadgetContext ctx;
    ctx.name = config.gadgets[i].name;
    ctx.position = i;
    ctx.properties = connection.defaults;
    for (const auto& [k, v] : config.gadgets[i].properties) ctx.properties[k] = v;
    ctx.connection = &connection;
    try {
      chain.stages_[i]->configure(ctx);
    } catch (const std::exception& e) {
      throw AssemblyError("gadget '" + ctx.name + "' (position " + std::to_string(i + 1) +
                          ") failed to configure: " + e.what());
    }
    spdlog::debug("configured gadget {} '{}'", i + 1, ctx.name);
  }
  return chain;
}

namespace {

class VectorEmitter : public Emitter {
 public:
  explicit VectorEmitter(std::vector<Item>& out) : out_(out) {}
  void emit(Item item) override { out_.push_back(std::move(item)); }

 private:
  std::vector<Item>& out_;
};

}  // namespace

std::vector<Item> run_inline(Chain& chain, std::vector<Item> inputs) {
  std::vector<Item> current = std::move(inputs);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    std::vector<Item> next;
    VectorEmitter emitter(next);
    for (auto& item : current) chain.stage(i).process(std::move(item), emitter);
    chain.stage(i).flush(emitter);
    current = std::move(next);
  }
  return current;
}

}  // namespace icmr::chain
