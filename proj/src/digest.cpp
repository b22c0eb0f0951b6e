#include "flowguess/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

#include "flowguess/utf8.hpp"

namespace flowguess {

Sha256Stream::Sha256Stream() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest init failed");
    }
}

Sha256Stream::~Sha256Stream() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256Stream::update(std::string_view bytes) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
}

Sha256 Sha256Stream::finish() {
    Sha256 out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len);
    return out;
}

Sha256 sha256(std::string_view bytes) {
    Sha256Stream s;
    s.update(bytes);
    return s.finish();
}

std::string sha256_hex(std::string_view bytes) {
    const Sha256 d = sha256(bytes);
    return utf8::to_hex(std::string_view(reinterpret_cast<const char*>(d.data()), d.size()));
}

}  // namespace flowguess
