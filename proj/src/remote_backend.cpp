// SPDX-License-Identifier: Apache-2.0
#include <guimig/gateway.hpp>

#include <httplib.h>

#include <cstdlib>

namespace guimig
{

using nlohmann::json;

std::string base64_encode(std::string_view data)
{
    static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < data.size(); i += 3)
    {
        const auto n = (static_cast<unsigned char>(data[i]) << 16) | (static_cast<unsigned char>(data[i + 1]) << 8)
                       | static_cast<unsigned char>(data[i + 2]);
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += table[(n >> 6) & 63];
        out += table[n & 63];
    }
    if (i + 1 == data.size())
    {
        const auto n = static_cast<unsigned char>(data[i]) << 16;
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += "==";
    }
    else if (i + 2 == data.size())
    {
        const auto n = (static_cast<unsigned char>(data[i]) << 16) | (static_cast<unsigned char>(data[i + 1]) << 8);
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += table[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

RemoteConfig RemoteConfig::from_env(std::string model)
{
    RemoteConfig c;
    if (const char* e = std::getenv("VLM_ENDPOINT"))
        c.endpoint = e;
    else
        c.endpoint = "https://api.openai.com/v1/chat/completions";
    if (const char* k = std::getenv("VLM_API_KEY"))
        c.api_key = k;
    if (!model.empty())
        c.model = std::move(model);
    return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config): _config(std::move(config)) {}

namespace
{

std::string mime_for(const Screenshot& s)
{
    return s.format == "png" ? "image/png" : "image/x-portable-pixmap";
}

struct SplitUrl
{
    std::string origin; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = url.find('/', host_start);
    if (slash == std::string::npos)
        return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

} // namespace

json RemoteBackend::request_body(const PromptBundle& bundle) const
{
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", bundle.text()}});
    for (const auto& img: bundle.images)
    {
        content.push_back({{"type", "text"}, {"text", "[" + img.label + "] " + img.caption}});
        content.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:" + mime_for(img.image) + ";base64," + base64_encode(img.image.bytes)}}}});
    }
    json body;
    body["model"] = _config.model;
    body["temperature"] = _config.temperature;
    if (_config.seed)
        body["seed"] = *_config.seed;
    body["messages"] = json::array(
        {{{"role", "system"},
          {"content", "You assist with migrating GUI tests between Android apps of the same category. Role: "
                          + std::string(to_string(bundle.kind)) + "."}},
         {{"role", "user"}, {"content", content}}});
    return body;
}

VlmReply RemoteBackend::complete(const PromptBundle& bundle)
{
    const auto url = split_url(_config.endpoint);
    httplib::Client client(url.origin);
    const auto sec = _config.timeout_ms / 1000;
    const auto usec = (_config.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers headers;
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);
    const auto payload = request_body(bundle).dump();

    std::string last;
    for (int attempt = 0; attempt <= _config.max_retries; ++attempt)
    {
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res)
        {
            last = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("backend rejected credentials: HTTP " + std::to_string(res->status), attempt);
        if (res->status >= 500 || res->status == 429)
        {
            last = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw GatewayError("backend returned HTTP " + std::to_string(res->status), attempt);

        json j;
        try
        {
            j = json::parse(res->body);
        }
        catch (const json::parse_error& e)
        {
            last = std::string("undecodable response: ") + e.what();
            continue;
        }
        VlmReply reply;
        try
        {
            reply.raw = j.at("choices").at(0).at("message").at("content").get<std::string>();
        }
        catch (const json::exception& e)
        {
            throw GatewayError(std::string("response lacks message content: ") + e.what(), attempt);
        }
        if (auto u = j.find("usage"); u != j.end() && u->is_object())
        {
            reply.usage.prompt_tokens = u->value("prompt_tokens", 0);
            reply.usage.completion_tokens = u->value("completion_tokens", 0);
        }
        return reply;
    }
    throw GatewayError("backend unavailable: " + last, _config.max_retries);
}

} // namespace guimig
