#include "detdsci/encoding.hpp"

#include <array>

#include <openssl/evp.h>

#include "detdsci/errors.hpp"

namespace detdsci {

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                        static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0) {
        throw ParseError("base64 input length is not a multiple of 4");
    }
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    const int written = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                        static_cast<int>(text.size()));
    if (written < 0) {
        throw ParseError("malformed base64 input");
    }
    // EVP_DecodeBlock does not strip the bytes produced by '=' padding.
    std::size_t size = static_cast<std::size_t>(written);
    if (!text.empty() && text.back() == '=') {
        --size;
        if (text.size() >= 2 && text[text.size() - 2] == '=') {
            --size;
        }
    }
    out.resize(size);
    return out;
}

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

}  // namespace detdsci
