#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace duality {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense double tensor participating in reverse-mode differentiation.
// Row-major; rank 1 or 2 in practice.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty unless requires_grad

  Tensor() = default;
  Tensor(std::vector<int> s, bool rg);
  Tensor(std::vector<double> v, std::vector<int> s, bool rg);

  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr from(std::vector<double> values, std::vector<int> shape,
                        bool requires_grad = false);
  static TensorPtr scalar(double v, bool requires_grad = false);

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  int rows() const;
  int cols() const;
  bool is_scalar() const { return size() == 1; }
  double item() const;

  void ensure_grad();
  void zero_grad();

  static std::string shape_str(const std::vector<int>& s);
};

std::int64_t shape_numel(const std::vector<int>& shape);

// Ordered record of differentiable operations. Forward recording order is a
// topological order, so backward just walks the list in reverse. A tape and
// its tensors belong to one worker at a time.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }

  void record(TensorPtr out, std::vector<TensorPtr> inputs,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss)=1 and replays backward rules in reverse order,
  // accumulating into the grad of every requires_grad tensor, then clears
  // the tape. The loss must be a scalar produced on this tape.
  void backward(const TensorPtr& loss);

  // Same but keeps the recorded operations so a second objective sharing
  // this forward pass can also be differentiated.
  void backward_retain(const TensorPtr& loss);

  // Zeroes the grad of every tensor touched by recorded operations.
  void zero_grads();

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorPtr out;
    std::vector<TensorPtr> inputs;
    std::function<void()> backward;
  };
  void run_backward(const TensorPtr& loss);
  std::vector<Node> nodes_;
  bool recording_ = true;
};

}  // namespace duality
